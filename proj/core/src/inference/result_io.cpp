#include "loom/inference/result_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "loom/core/error.hpp"
#include "loom/toyworld/png_io.hpp"
#include "loom/trainer/config.hpp"

namespace loom::inference {

namespace {

std::string frame_name(int t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%03d.png", t);
  return buf;
}

std::string join(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  std::istringstream is(s);
  for (std::string tok; std::getline(is, tok, ',');) {
    if (!tok.empty()) out.push_back(std::stoi(tok));
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string trace_text(const InterleavedResult& r) {
  std::ostringstream os;
  os << "prompt = " << r.prompt << "\n"
     << "seed = " << r.seed << "\n"
     << "k_max = " << r.k_max << "\n"
     << "frames = " << r.trace.size() << "\n";
  for (const auto& t : r.trace) {
    const std::string p = "frame." + std::to_string(t.step) + ".";
    os << p << "seed = " << t.seed << "\n"
       << p << "history = " << join(t.history) << "\n"
       << p << "reference = " << (t.reference ? "true" : "false") << "\n"
       << p << "step_text = " << t.step_text << "\n"
       << p << "plan_hash = " << t.plan_hash << "\n"
       << p << "gamma = " << fmt(t.gamma) << "\n"
       << p << "s_entity = " << fmt(t.s_entity) << "\n"
       << p << "ode_steps = " << t.ode_steps << "\n";
  }
  return os.str();
}

void write_result(const std::filesystem::path& dir, const InterleavedResult& r) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "plan.txt", std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / "plan.txt").string());
    out << render_plan(r.plan) << "\n";
  }
  for (std::size_t i = 0; i < r.frames.size(); ++i) {
    toyworld::write_png(dir / frame_name(static_cast<int>(i) + 1), r.frames[i]);
  }
  std::ofstream out(dir / "trace.txt", std::ios::binary);
  if (!out) throw IoError("cannot write " + (dir / "trace.txt").string());
  out << trace_text(r);
}

InterleavedResult read_result(const std::filesystem::path& dir) {
  InterleavedResult r;
  {
    std::ifstream in(dir / "plan.txt", std::ios::binary);
    if (!in) throw IoError("cannot read " + (dir / "plan.txt").string());
    std::ostringstream os;
    os << in.rdbuf();
    r.plan = parse_plan(os.str());
  }
  const auto kv = trainer::KeyValues::load(dir / "trace.txt");
  r.prompt = kv.get_string("prompt", "");
  r.seed = kv.get_u64("seed", 0);
  r.k_max = kv.get_int("k_max", 2);
  const int n = kv.get_int("frames", 0);
  for (int t = 1; t <= n; ++t) {
    const std::string p = "frame." + std::to_string(t) + ".";
    FrameTrace tr;
    tr.step = t;
    tr.seed = kv.get_u64(p + "seed", 0);
    tr.history = split_ints(kv.get_string(p + "history", ""));
    tr.reference = kv.get_bool(p + "reference", false);
    tr.step_text = kv.get_string(p + "step_text", "");
    tr.plan_hash = kv.get_u64(p + "plan_hash", 0);
    tr.gamma = kv.get_double(p + "gamma", 1.0);
    tr.s_entity = kv.get_double(p + "s_entity", 1.0);
    tr.ode_steps = kv.get_int(p + "ode_steps", 0);
    r.trace.push_back(std::move(tr));
    r.frames.push_back(toyworld::read_png(dir / frame_name(t)));
  }
  return r;
}

}  // namespace loom::inference
