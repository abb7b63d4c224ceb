#include "loom/toyworld/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "loom/core/error.hpp"
#include "loom/core/random.hpp"
#include "loom/core/vocabulary.hpp"
#include "loom/toyworld/png_io.hpp"
#include "loom/trainer/config.hpp"

namespace loom::toyworld {

namespace fs = std::filesystem;

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split split_from_string(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw ParseError("unknown split: " + std::string(s));
}

std::string_view to_string(Family f) {
  switch (f) {
    case Family::Tutorial: return "tutorial";
    case Family::Composition: return "composition";
    case Family::Style: return "style";
  }
  return "?";
}

namespace {

Family family_from_string(std::string_view s) {
  if (s == "tutorial") return Family::Tutorial;
  if (s == "composition") return Family::Composition;
  if (s == "style") return Family::Style;
  throw ParseError("unknown family: " + std::string(s));
}

std::string numbered(std::string_view prefix, int i, const char* ext = "") {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%03d%s", std::string(prefix).c_str(), i, ext);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_tutorial(const fs::path& dir, const DatasetEntry& e) {
  const auto tut = gen_tutorial(e.seed);
  const auto& s = tut.spec;
  write_text(dir / "prompt.txt", tut.prompt + "\n");
  write_text(dir / "plan.txt", render_plan(tut.plan) + "\n");
  for (std::size_t i = 0; i < tut.frames.size(); ++i) {
    write_png(dir / numbered("frame_", static_cast<int>(i) + 1, ".png"), tut.frames[i]);
  }
  write_png(dir / "reference.png", tut.final_frame());
  std::ostringstream meta;
  meta << "family = tutorial\nseed = " << e.seed << "\nsplit = " << to_string(e.split)
       << "\nsubject = " << to_string(s.subject) << "\ncolor = " << to_string(s.color)
       << "\nn_steps = " << s.n_steps << "\ncx = " << s.cx << "\ncy = " << s.cy << "\nradius = " << s.radius
       << "\nsubject_pixels = " << tut.geometry.area() << "\n";
  write_text(dir / "meta.txt", meta.str());
}

void write_composition(const fs::path& dir, const DatasetEntry& e) {
  const auto comp = gen_composition(e.seed);
  write_png(dir / "scene.png", comp.scene);
  write_text(dir / "forward.txt", comp.forward + "\n");
  write_text(dir / "reverse.txt", comp.reverse + "\n");
  std::ostringstream meta;
  meta << "family = composition\nseed = " << e.seed << "\nsplit = " << to_string(e.split)
       << "\nentities = " << comp.entities.size() << "\n";
  for (std::size_t i = 0; i < comp.entities.size(); ++i) {
    const auto& en = comp.entities[i];
    const int k = static_cast<int>(i) + 1;
    write_png(dir / numbered("entity_", k, ".png"), en.image);
    write_mask_png(dir / numbered("mask_", k, ".png"), en.mask);
    const std::string p = "entity." + std::to_string(k) + ".";
    meta << p << "token = " << en.entity << "\n"
         << p << "subject = " << to_string(en.subject) << "\n"
         << p << "color = " << to_string(en.color) << "\n"
         << p << "radius = " << en.radius << "\n"
         << p << "cx = " << en.cx << "\n"
         << p << "cy = " << en.cy << "\n"
         << p << "mask_area = " << mask_area(en.mask) << "\n";
  }
  write_text(dir / "meta.txt", meta.str());
}

void write_style(const fs::path& dir, const DatasetEntry& e) {
  const auto tri = gen_style_triplet(e.seed);
  write_png(dir / "content.png", tri.content);
  write_png(dir / "style.png", tri.style_reference);
  write_png(dir / "output.png", tri.output);
  write_text(dir / "prompt.txt", tri.prompt + "\n");
  std::ostringstream meta;
  meta << "family = style\nseed = " << e.seed << "\nsplit = " << to_string(e.split)
       << "\nfilter = " << to_string(tri.filter) << "\nsubject = " << to_string(tri.subject) << "\n";
  write_text(dir / "meta.txt", meta.str());
}

std::string strip_newline(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

}  // namespace

Split split_of(std::uint64_t seed) {
  switch (seed % 20) {
    case 0: return Split::Val;
    case 1: return Split::Test;
    default: return Split::Train;
  }
}

std::uint64_t sample_seed(std::uint64_t dataset_seed, Family family, int index) {
  return derive_seed(dataset_seed, {static_cast<std::uint64_t>(family), static_cast<std::uint64_t>(index)});
}

std::vector<DatasetEntry> plan_dataset(const DatasetConfig& c) {
  if (c.count < 0) throw ConfigError("count must be non-negative");
  std::vector<DatasetEntry> out;
  auto add = [&](Family f, int n) {
    for (int i = 0; i < n; ++i) {
      DatasetEntry e;
      e.family = f;
      e.seed = sample_seed(c.seed, f, i);
      e.split = split_of(e.seed);
      char buf[64];
      std::snprintf(buf, sizeof buf, "%s_%05d", std::string(to_string(f)).c_str(), i);
      e.name = buf;
      out.push_back(e);
    }
  };
  add(Family::Tutorial, c.count);
  add(Family::Composition, static_cast<int>(std::lround(c.count * c.composition_ratio)));
  add(Family::Style, static_cast<int>(std::lround(c.count * c.style_ratio)));
  return out;
}

void write_dataset(const fs::path& dir, const DatasetConfig& config) {
  const auto entries = plan_dataset(config);
  fs::create_directories(dir);
  Vocabulary::builtin().save(dir / "vocab.txt");
  std::ostringstream manifest;
  manifest << "name,family,split,seed\n";
  for (const auto& e : entries) {
    const auto sub = dir / e.name;
    fs::create_directories(sub);
    switch (e.family) {
      case Family::Tutorial: write_tutorial(sub, e); break;
      case Family::Composition: write_composition(sub, e); break;
      case Family::Style: write_style(sub, e); break;
    }
    manifest << e.name << "," << to_string(e.family) << "," << to_string(e.split) << "," << e.seed << "\n";
  }
  write_text(dir / "manifest.csv", manifest.str());
}

std::vector<DatasetEntry> read_manifest(const fs::path& dir) {
  std::istringstream in(read_text(dir / "manifest.csv"));
  std::string line;
  std::getline(in, line);
  if (line != "name,family,split,seed") throw ParseError("unexpected manifest header in " + dir.string());
  std::vector<DatasetEntry> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string name, family, split, seed;
    if (!std::getline(row, name, ',') || !std::getline(row, family, ',') || !std::getline(row, split, ',') ||
        !std::getline(row, seed)) {
      throw ParseError("malformed manifest line: " + line);
    }
    out.push_back({name, family_from_string(family), split_from_string(split), std::stoull(seed)});
  }
  return out;
}

std::vector<Tutorial> tutorials_for(const DatasetConfig& config, Split split) {
  std::vector<Tutorial> out;
  for (const auto& e : plan_dataset(config)) {
    if (e.family == Family::Tutorial && e.split == split) out.push_back(gen_tutorial(e.seed));
  }
  return out;
}

std::vector<Tutorial> load_tutorials(const fs::path& dir, Split split) {
  std::vector<Tutorial> out;
  for (const auto& e : read_manifest(dir)) {
    if (e.family != Family::Tutorial || e.split != split) continue;
    const auto sub = dir / e.name;
    const auto meta = trainer::KeyValues::load(sub / "meta.txt");
    Tutorial t;
    t.spec.subject = subject_from_string(meta.get_string("subject", ""));
    t.spec.color = color_from_string(meta.get_string("color", ""));
    t.spec.n_steps = meta.get_int("n_steps", 0);
    t.spec.cx = meta.get_int("cx", 0);
    t.spec.cy = meta.get_int("cy", 0);
    t.spec.radius = meta.get_int("radius", 0);
    t.prompt = strip_newline(read_text(sub / "prompt.txt"));
    t.plan = parse_plan(read_text(sub / "plan.txt"));
    t.geometry = make_geometry(t.spec.subject, t.spec.cx, t.spec.cy, t.spec.radius);
    for (int i = 1; i <= static_cast<int>(t.plan.size()); ++i) {
      t.frames.push_back(read_png(sub / numbered("frame_", i, ".png")));
    }
    out.push_back(std::move(t));
  }
  return out;
}

trainer::Sequence to_sequence(const Tutorial& tutorial, std::uint64_t id, bool with_reference) {
  trainer::Sequence s;
  s.id = id;
  s.prompt = tutorial.prompt;
  s.plan = tutorial.plan;
  s.frames = tutorial.frames;
  if (with_reference) s.reference = tutorial.final_frame();
  return s;
}

std::vector<trainer::Sequence> to_sequences(const std::vector<Tutorial>& tutorials, bool with_reference) {
  std::vector<trainer::Sequence> out;
  for (std::size_t i = 0; i < tutorials.size(); ++i) {
    out.push_back(to_sequence(tutorials[i], static_cast<std::uint64_t>(i), with_reference));
  }
  return out;
}

}  // namespace loom::toyworld
