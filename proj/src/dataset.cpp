#include "vdm/dataset.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "vdm/png_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace vdm {

std::vector<std::string> list_clip_dirs(const std::string& dataset_dir) {
  if (!fs::is_directory(dataset_dir))
    throw std::runtime_error("dataset: not a directory: " + dataset_dir);
  std::vector<std::string> dirs;
  for (const auto& e : fs::directory_iterator(dataset_dir))
    if (e.is_directory()) dirs.push_back(e.path().filename().string());
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

std::vector<std::string> list_pngs(const std::string& clip_dir) {
  if (!fs::is_directory(clip_dir))
    throw std::runtime_error("dataset: not a directory: " + clip_dir);
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(clip_dir))
    if (e.is_regular_file() && e.path().extension() == ".png")
      files.push_back(e.path().filename().string());
  std::sort(files.begin(), files.end());
  return files;
}

Tensor4f load_clip_frames(const std::string& clip_dir) {
  const auto files = list_pngs(clip_dir);
  if (files.empty())
    throw std::runtime_error("dataset: no PNG frames in " + clip_dir);
  Tensor4f first = read_png(clip_dir + "/" + files[0]);
  Tensor4f frames(Index(files.size()), 3, first.h(), first.w());
  frames.item_matrix(0) = first.item_matrix(0);
  for (size_t i = 1; i < files.size(); ++i) {
    Tensor4f f = read_png(clip_dir + "/" + files[i]);
    if (f.h() != first.h() || f.w() != first.w())
      throw std::runtime_error("dataset: frame size mismatch in " + clip_dir);
    frames.item_matrix(Index(i)) = f.item_matrix(0);
  }
  return frames;
}

void save_clip_frames(const std::string& clip_dir, const Tensor4f& frames) {
  fs::create_directories(clip_dir);
  char name[32];
  for (Index t = 0; t < frames.n(); ++t) {
    std::snprintf(name, sizeof(name), "%06ld.png", long(t));
    write_png(clip_dir + "/" + name, slice_item(frames, t));
  }
}

void write_meta(const std::string& clip_dir, const DegradedMeta& meta) {
  json j;
  j["task"] = to_string(meta.task);
  if (meta.task == Task::Deinterlace)
    j["first_parity"] = to_string(meta.first_parity);
  else
    j["pattern"] = to_string(meta.pattern);
  j["source_height"] = meta.source_height;
  j["source_width"] = meta.source_width;
  j["frames"] = meta.frames;
  std::ofstream out(clip_dir + "/meta.json");
  if (!out) throw std::runtime_error("dataset: cannot write meta.json in " + clip_dir);
  out << j.dump(2) << '\n';
}

bool has_meta(const std::string& clip_dir) {
  return fs::exists(clip_dir + "/meta.json");
}

DegradedMeta read_meta(const std::string& clip_dir) {
  std::ifstream in(clip_dir + "/meta.json");
  if (!in)
    throw std::runtime_error("dataset: missing meta.json in " + clip_dir);
  json j;
  in >> j;
  DegradedMeta meta;
  const std::string task = j.at("task").get<std::string>();
  meta.task = task == "Deinterlace" ? Task::Deinterlace : Task::Demosaic;
  if (meta.task == Task::Deinterlace)
    meta.first_parity = j.at("first_parity").get<std::string>() == "Odd"
                            ? FieldParity::Odd
                            : FieldParity::Even;
  else
    meta.pattern = cfa_from_string(j.at("pattern").get<std::string>());
  meta.source_height = j.at("source_height").get<Index>();
  meta.source_width = j.at("source_width").get<Index>();
  meta.frames = j.at("frames").get<Index>();
  return meta;
}

InterlacedSequence<float> load_interlaced(const std::string& clip_dir,
                                          const DegradedMeta& meta) {
  InterlacedSequence<float> seq;
  seq.fields = load_clip_frames(clip_dir);
  seq.source_height = meta.source_height;
  FieldParity p = meta.first_parity;
  for (Index t = 0; t < seq.fields.n(); ++t) {
    seq.parities.push_back(p);
    p = opposite(p);
  }
  if (seq.fields.h() * 2 != meta.source_height)
    throw std::runtime_error("dataset: field height does not match meta in " +
                             clip_dir);
  return seq;
}

MosaicSequence<float> load_mosaic(const std::string& clip_dir,
                                  const DegradedMeta& meta) {
  MosaicSequence<float> seq;
  seq.frames = load_clip_frames(clip_dir);
  seq.pattern = meta.pattern;
  return seq;
}

}  // namespace vdm
