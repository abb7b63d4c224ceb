#pragma once

#include <filesystem>

#include "loom/inference/generate.hpp"

namespace loom::inference {

/// Directory layout: plan.txt, frame_001.png ..., trace.txt.
void write_result(const std::filesystem::path& dir, const InterleavedResult& result);
InterleavedResult read_result(const std::filesystem::path& dir);

std::string trace_text(const InterleavedResult& result);

}  // namespace loom::inference
