// Copyright 2026 The StitchFusion C++ Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "stitchfusion/dataset.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "stitchfusion/rng.h"

namespace stitchfusion {

namespace fs = std::filesystem;
using nlohmann::json;

std::size_t Dataset::modality_index(const std::string& name) const {
  for (std::size_t m = 0; m < modalities.size(); ++m)
    if (modalities[m].name == name) return m;
  throw std::invalid_argument("dataset has no modality named '" + name + "'");
}

Tensor Dataset::image(std::size_t sample, std::size_t modality) const {
  const auto& src = samples.at(sample).images.at(modality);
  std::vector<double> v(src.begin(), src.end());
  return Tensor::from_data({modalities[modality].channels, height, width}, std::move(v));
}

void Dataset::validate() const {
  if (num_classes < 2) throw FormatError("dataset: num_classes must be at least 2");
  if (height == 0 || width == 0) throw FormatError("dataset: empty spatial extent");
  if (modalities.empty()) throw FormatError("dataset: no modalities");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.images.size() != modalities.size())
      throw FormatError("dataset: sample " + std::to_string(i) + " has wrong modality count");
    for (std::size_t m = 0; m < modalities.size(); ++m)
      if (s.images[m].size() != modalities[m].channels * height * width)
        throw FormatError("dataset: sample " + std::to_string(i) + " image size mismatch");
    if (s.labels.size() != height * width)
      throw FormatError("dataset: sample " + std::to_string(i) + " label size mismatch");
    for (std::uint16_t l : s.labels)
      if (l >= num_classes && l != kIgnoreIndex)
        throw FormatError("dataset: sample " + std::to_string(i) + " label " + std::to_string(l) +
                          " out of range");
  }
}

std::vector<std::vector<bool>> assign_visibility(std::size_t num_classes, std::size_t modalities,
                                                 std::uint64_t seed) {
  std::vector<std::vector<bool>> vis(num_classes, std::vector<bool>(modalities, false));
  vis[0].assign(modalities, true);
  std::vector<std::size_t> order(num_classes - 1);
  std::iota(order.begin(), order.end(), 1);
  Rng rng = Rng::derive(seed, 0x515);
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
    std::swap(order[i - 1], order[j]);
  }
  for (std::size_t q = 0; q < order.size(); ++q) vis[order[q]][q % modalities] = true;
  return vis;
}

namespace {

// Colour of the q-th (of n) visible class in a modality with `channels`
// channels: points on a circle around the background grey, so no two classes
// share a direction with the background.
std::vector<double> class_colour(std::size_t q, std::size_t n, std::size_t channels) {
  const double theta = 2.0 * std::numbers::pi * static_cast<double>(q) / static_cast<double>(n) +
                       std::numbers::pi / 4.0;
  const double period = static_cast<double>(std::max<std::size_t>(channels, 3));
  std::vector<double> c(channels);
  for (std::size_t ch = 0; ch < channels; ++ch)
    c[ch] = kSynthBackground + 0.35 * std::cos(theta + 2.0 * std::numbers::pi * static_cast<double>(ch) / period);
  return c;
}

struct Shape2D {
  bool disc;
  double cy, cx, half_h, half_w;  // disc uses half_h as radius
  std::uint16_t cls;

  bool contains(std::size_t y, std::size_t x) const {
    const double py = static_cast<double>(y) + 0.5, px = static_cast<double>(x) + 0.5;
    if (disc) return (py - cy) * (py - cy) + (px - cx) * (px - cx) <= half_h * half_h;
    return std::abs(py - cy) <= half_h && std::abs(px - cx) <= half_w;
  }
};

}  // namespace

namespace {

// Stable 32-bit FNV-1a; splits of one seed share classes and colours but
// draw different scenes.
std::uint64_t split_tag(const std::string& split) {
  std::uint32_t h = 2166136261u;
  for (unsigned char c : split) {
    h ^= c;
    h *= 16777619u;
  }
  return static_cast<std::uint64_t>(h) << 32;
}

}  // namespace

Dataset generate_synthetic(const SynthOptions& o) {
  if (o.num_classes < 3) throw std::invalid_argument("synthetic data needs at least 3 classes");
  if (o.num_classes >= kIgnoreIndex) throw std::invalid_argument("too many classes");
  if (o.modalities < 2) throw std::invalid_argument("synthetic data needs at least 2 modalities");
  if (o.height < 8 || o.width < 8) throw std::invalid_argument("synthetic images must be at least 8x8");
  if (o.channels == 0) throw std::invalid_argument("channels must be positive");
  if (!o.modality_names.empty() && o.modality_names.size() != o.modalities)
    throw std::invalid_argument("modality name count does not match modality count");

  Dataset ds;
  ds.seed = o.seed;
  ds.num_classes = o.num_classes;
  ds.height = o.height;
  ds.width = o.width;
  ds.split = o.split;
  for (std::size_t m = 0; m < o.modalities; ++m) {
    ds.modalities.push_back(
        {o.modality_names.empty() ? "mod" + std::to_string(m) : o.modality_names[m], o.channels});
  }
  ds.visibility = assign_visibility(o.num_classes, o.modalities, o.seed);

  // Per-modality colour table; background rows stay empty.
  std::vector<std::vector<std::vector<double>>> colours(o.modalities,
                                                        std::vector<std::vector<double>>(o.num_classes));
  for (std::size_t m = 0; m < o.modalities; ++m) {
    std::vector<std::size_t> visible;
    for (std::size_t c = 1; c < o.num_classes; ++c)
      if (ds.visibility[c][m]) visible.push_back(c);
    for (std::size_t q = 0; q < visible.size(); ++q)
      colours[m][visible[q]] = class_colour(q, visible.size(), o.channels);
  }

  const std::size_t hw = o.height * o.width;
  const auto min_size = static_cast<std::int64_t>(std::max<std::size_t>(2, std::min(o.height, o.width) / 8));
  const auto max_size = static_cast<std::int64_t>(std::max<std::size_t>(min_size, std::min(o.height, o.width) / 3));
  for (std::size_t i = 0; i < o.samples; ++i) {
    Rng rng = Rng::derive(o.seed, split_tag(o.split) + i);
    const auto count = rng.uniform_int(3, 8);
    std::vector<Shape2D> shapes;
    for (std::int64_t k = 0; k < count; ++k) {
      Shape2D s{};
      s.cls = static_cast<std::uint16_t>(rng.uniform_int(1, static_cast<std::int64_t>(o.num_classes) - 1));
      s.disc = rng.uniform() < 0.5;
      const double sh = static_cast<double>(rng.uniform_int(min_size, max_size));
      const double sw = s.disc ? sh : static_cast<double>(rng.uniform_int(min_size, max_size));
      s.half_h = sh / 2.0;
      s.half_w = sw / 2.0;
      s.cy = rng.uniform(s.half_h, static_cast<double>(o.height) - s.half_h);
      s.cx = rng.uniform(s.half_w, static_cast<double>(o.width) - s.half_w);
      shapes.push_back(s);
    }
    MultimodalSample sample;
    sample.labels.assign(hw, 0);
    for (const Shape2D& s : shapes)
      for (std::size_t y = 0; y < o.height; ++y)
        for (std::size_t x = 0; x < o.width; ++x)
          if (s.contains(y, x)) sample.labels[y * o.width + x] = s.cls;

    for (std::size_t m = 0; m < o.modalities; ++m) {
      std::vector<float> img(o.channels * hw);
      for (std::size_t ch = 0; ch < o.channels; ++ch) {
        for (std::size_t p = 0; p < hw; ++p) {
          const std::uint16_t cls = sample.labels[p];
          double v = kSynthBackground;
          if (cls != 0 && ds.visibility[cls][m]) v = colours[m][cls][ch];
          v += kSynthNoiseStd * rng.normal();
          img[ch * hw + p] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
      }
      sample.images.push_back(std::move(img));
    }
    ds.samples.push_back(std::move(sample));
  }
  return ds;
}

// Blob I/O -------------------------------------------------------------------

namespace {

void write_bytes(const fs::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for " + path.string());
}

std::vector<unsigned char> read_bytes(const fs::path& path, std::size_t expected) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw FormatError("missing blob " + path.string());
  const auto size = static_cast<std::size_t>(in.tellg());
  if (size != expected) {
    throw FormatError("blob " + path.string() + " holds " + std::to_string(size) + " bytes, expected " +
                      std::to_string(expected));
  }
  in.seekg(0);
  std::vector<unsigned char> bytes(size);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  if (!in) throw FormatError("read failed for " + path.string());
  return bytes;
}

template <typename U>
void put_le(std::vector<unsigned char>& out, U value) {
  for (std::size_t b = 0; b < sizeof(U); ++b) out.push_back(static_cast<unsigned char>(value >> (8 * b)));
}

template <typename U>
U get_le(const unsigned char* p) {
  U v = 0;
  for (std::size_t b = 0; b < sizeof(U); ++b) v |= static_cast<U>(p[b]) << (8 * b);
  return v;
}

}  // namespace

void write_f32_blob(const fs::path& path, const std::vector<float>& values) {
  std::vector<unsigned char> bytes;
  bytes.reserve(values.size() * 4);
  for (float v : values) put_le(bytes, std::bit_cast<std::uint32_t>(v));
  write_bytes(path, bytes);
}

void write_u16_blob(const fs::path& path, const std::vector<std::uint16_t>& values) {
  std::vector<unsigned char> bytes;
  bytes.reserve(values.size() * 2);
  for (std::uint16_t v : values) put_le(bytes, v);
  write_bytes(path, bytes);
}

void write_f64_blob(const fs::path& path, std::span<const double> values) {
  std::vector<unsigned char> bytes;
  bytes.reserve(values.size() * 8);
  for (double v : values) put_le(bytes, std::bit_cast<std::uint64_t>(v));
  write_bytes(path, bytes);
}

std::vector<float> read_f32_blob(const fs::path& path, std::size_t count) {
  auto bytes = read_bytes(path, count * 4);
  std::vector<float> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = std::bit_cast<float>(get_le<std::uint32_t>(&bytes[i * 4]));
  return out;
}

std::vector<std::uint16_t> read_u16_blob(const fs::path& path, std::size_t count) {
  auto bytes = read_bytes(path, count * 2);
  std::vector<std::uint16_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = get_le<std::uint16_t>(&bytes[i * 2]);
  return out;
}

std::vector<double> read_f64_blob(const fs::path& path, std::size_t count) {
  auto bytes = read_bytes(path, count * 8);
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = std::bit_cast<double>(get_le<std::uint64_t>(&bytes[i * 8]));
  return out;
}

fs::path resolve_relative(const fs::path& root, const std::string& rel) {
  const fs::path p(rel);
  if (rel.empty() || p.is_absolute() || p.has_root_name() || p.has_root_directory())
    throw FormatError("manifest paths must be relative, got '" + rel + "'");
  for (const auto& part : p)
    if (part == "..") throw FormatError("manifest path escapes the directory: '" + rel + "'");
  return root / p;
}

// Manifest -------------------------------------------------------------------

namespace {

constexpr const char* kDatasetFormat = "stitchfusion-dataset";

std::string blob_name(std::size_t sample, const std::string& suffix) {
  std::ostringstream os;
  os << "blobs/" << std::setw(6) << std::setfill('0') << sample << '_' << suffix;
  return os.str();
}

std::vector<std::size_t> read_shape(const json& j, const std::string& what) {
  if (!j.is_array()) throw FormatError(what + ": shape must be an array");
  std::vector<std::size_t> shape;
  for (const auto& e : j) {
    if (!e.is_number_unsigned()) throw FormatError(what + ": shape entries must be unsigned integers");
    shape.push_back(e.get<std::size_t>());
  }
  return shape;
}

}  // namespace

void save_dataset(const Dataset& ds, const fs::path& dir) {
  ds.validate();
  fs::create_directories(dir / "blobs");
  json manifest;
  manifest["format"] = kDatasetFormat;
  manifest["version"] = ds.version;
  manifest["seed"] = ds.seed;
  manifest["num_classes"] = ds.num_classes;
  manifest["ignore_index"] = kIgnoreIndex;
  manifest["height"] = ds.height;
  manifest["width"] = ds.width;
  manifest["split"] = ds.split;
  json mods = json::array();
  for (const auto& m : ds.modalities) mods.push_back({{"name", m.name}, {"channels", m.channels}});
  manifest["modalities"] = mods;
  manifest["visibility"] = ds.visibility;
  json samples = json::array();
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    json images = json::array();
    for (std::size_t m = 0; m < ds.modalities.size(); ++m) {
      const std::string rel = blob_name(i, ds.modalities[m].name + ".f32");
      write_f32_blob(dir / rel, ds.samples[i].images[m]);
      images.push_back({{"modality", ds.modalities[m].name},
                        {"path", rel},
                        {"shape", {ds.modalities[m].channels, ds.height, ds.width}}});
    }
    const std::string label_rel = blob_name(i, "label.u16");
    write_u16_blob(dir / label_rel, ds.samples[i].labels);
    samples.push_back({{"images", images}, {"label", {{"path", label_rel}, {"shape", {ds.height, ds.width}}}}});
  }
  manifest["samples"] = samples;
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw FormatError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

Dataset load_dataset(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw FormatError("no manifest.json in " + dir.string());
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    throw FormatError("malformed manifest in " + dir.string() + ": " + e.what());
  }
  try {
    if (m.value("format", std::string()) != kDatasetFormat)
      throw FormatError("not a stitchfusion dataset manifest: " + dir.string());
    Dataset ds;
    ds.version = m.at("version").get<int>();
    if (ds.version != kDatasetFormatVersion)
      throw FormatError("unsupported dataset version " + std::to_string(ds.version));
    ds.seed = m.at("seed").get<std::uint64_t>();
    ds.num_classes = m.at("num_classes").get<std::size_t>();
    ds.height = m.at("height").get<std::size_t>();
    ds.width = m.at("width").get<std::size_t>();
    ds.split = m.at("split").get<std::string>();
    for (const auto& mod : m.at("modalities"))
      ds.modalities.push_back({mod.at("name").get<std::string>(), mod.at("channels").get<std::size_t>()});
    if (m.contains("visibility")) ds.visibility = m.at("visibility").get<std::vector<std::vector<bool>>>();
    for (const auto& rec : m.at("samples")) {
      MultimodalSample s;
      const auto& images = rec.at("images");
      if (images.size() != ds.modalities.size()) throw FormatError("sample modality count mismatch");
      for (std::size_t k = 0; k < images.size(); ++k) {
        const auto& img = images[k];
        if (img.at("modality").get<std::string>() != ds.modalities[k].name)
          throw FormatError("sample images out of modality order");
        const auto shape = read_shape(img.at("shape"), "image");
        const std::vector<std::size_t> expected{ds.modalities[k].channels, ds.height, ds.width};
        if (shape != expected) throw FormatError("image shape does not match the manifest header");
        s.images.push_back(
            read_f32_blob(resolve_relative(dir, img.at("path").get<std::string>()), shape_numel(shape)));
      }
      const auto& label = rec.at("label");
      const auto lshape = read_shape(label.at("shape"), "label");
      if (lshape != std::vector<std::size_t>{ds.height, ds.width})
        throw FormatError("label shape does not match the manifest header");
      s.labels = read_u16_blob(resolve_relative(dir, label.at("path").get<std::string>()), shape_numel(lshape));
      ds.samples.push_back(std::move(s));
    }
    ds.validate();
    return ds;
  } catch (const json::exception& e) {
    throw FormatError("invalid manifest in " + dir.string() + ": " + e.what());
  }
}

std::vector<std::vector<std::size_t>> batch_iter(std::size_t n, std::size_t batch_size,
                                                 std::uint64_t shuffle_seed, std::uint64_t epoch) {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be at least 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng::derive(shuffle_seed, 0xBA7C0000ULL + epoch);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
    std::swap(order[i - 1], order[j]);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace stitchfusion
