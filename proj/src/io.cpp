#include "nca/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <png.h>

namespace nca {

namespace {

constexpr char kMagic[4] = {'N', 'C', 'A', 'W'};
constexpr size_t kHeaderBytes = 4 + 4 * 4 + 1 + 4;
constexpr size_t kParameterCount =
    kPerceptionSize * kHiddenWidth + kHiddenWidth + kHiddenWidth * kChannels + kChannels;

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  size_t remaining() const { return bytes_.size() - pos_; }
  void need(size_t n, const char* what) const {
    if (remaining() < n) throw Error(ErrorCode::kTruncated, std::string("checkpoint truncated in ") + what);
  }
  std::uint8_t u8() { return bytes_[pos_++]; }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string raw(size_t n) {
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ModelWeights& weights, std::string_view metadata) {
  ByteWriter w;
  w.raw(std::string_view(kMagic, 4));
  w.u32(kCheckpointVersion);
  w.u32(kChannels);
  w.u32(kHiddenWidth);
  w.u32(3);
  w.u8(static_cast<std::uint8_t>(to_char(weights.variant)));
  w.f32(static_cast<float>(weights.fire_rate));
  weights.params.for_each([&](std::span<const float> t) {
    for (float v : t) w.f32(v);
  });
  w.u32(static_cast<std::uint32_t>(metadata.size()));
  w.raw(metadata);
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.need(4, "magic");
  if (r.raw(4) != std::string_view(kMagic, 4)) throw Error(ErrorCode::kBadMagic, "not a checkpoint (bad magic)");
  r.need(kHeaderBytes - 4, "header");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::kVersionMismatch, "unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t channels = r.u32();
  const std::uint32_t hidden = r.u32();
  const std::uint32_t multiplier = r.u32();
  if (channels != kChannels || hidden != kHiddenWidth || multiplier != 3) {
    throw Error(ErrorCode::kDimensionMismatch, "checkpoint dimensions " + std::to_string(channels) + "/" +
                                                   std::to_string(hidden) + "/" + std::to_string(multiplier) +
                                                   " differ from 17/128/3");
  }
  const char tag = static_cast<char>(r.u8());
  if (tag != 'A' && tag != 'B' && tag != 'C') throw Error(ErrorCode::kIo, "corrupt variant tag");
  const float fire_rate = r.f32();
  if (!(fire_rate > 0.0f && fire_rate <= 1.0f)) throw Error(ErrorCode::kIo, "corrupt fire rate");

  r.need(kParameterCount * 4, "parameters");
  Checkpoint cp{{Parameters<float>::zeros(), parse_variant(tag), fire_rate}, {}};
  cp.weights.params.for_each([&](std::span<float> t) {
    for (float& v : t) v = r.f32();
  });
  r.need(4, "metadata length");
  const std::uint32_t meta_len = r.u32();
  r.need(meta_len, "metadata");
  cp.metadata = r.raw(meta_len);
  if (r.remaining() != 0) {
    throw Error(ErrorCode::kDimensionMismatch,
                "checkpoint has " + std::to_string(r.remaining()) + " bytes beyond its declared length");
  }
  return cp;
}

void save_checkpoint(const ModelWeights& weights, const std::filesystem::path& path, std::string_view metadata) {
  const auto bytes = encode_checkpoint(weights, metadata);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  return decode_checkpoint(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Rgba8Image read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw Error(ErrorCode::kIo, "cannot read PNG " + path.string() + ": " + image.message);
  }
  if (image.format != PNG_FORMAT_RGBA) {
    png_image_free(&image);
    throw Error(ErrorCode::kInvalidArgument, path.string() + " is not an 8-bit RGBA PNG");
  }
  Rgba8Image out{static_cast<int>(image.width), static_cast<int>(image.height), {}};
  out.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    throw Error(ErrorCode::kIo, "cannot decode PNG " + path.string() + ": " + image.message);
  }
  return out;
}

void write_png(const std::filesystem::path& path, const Rgba8Image& img) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGBA;
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.pixels.data(), 0, nullptr)) {
    throw Error(ErrorCode::kIo, "cannot write PNG " + path.string() + ": " + image.message);
  }
}

IdealImage to_ideal(const Rgba8Image& image) {
  IdealImage out(image.width, image.height);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const std::uint8_t* p = &image.pixels[(static_cast<size_t>(y) * image.width + x) * 4];
      const float a = p[3] / 255.0f;
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = p[c] / 255.0f * a;
      out.at(x, y, 3) = a;
    }
  }
  return out;
}

IdealImage resample_nearest(const IdealImage& image, int desired_width) {
  if (desired_width <= 0 || desired_width == image.width()) return image;
  const int w = desired_width;
  const int h = std::max(1, static_cast<int>(std::lround(static_cast<double>(image.height()) * w / image.width())));
  IdealImage out(w, h);
  for (int y = 0; y < h; ++y) {
    const int sy = std::min(image.height() - 1, static_cast<int>((y + 0.5) * image.height() / h));
    for (int x = 0; x < w; ++x) {
      const int sx = std::min(image.width() - 1, static_cast<int>((x + 0.5) * image.width() / w));
      for (int c = 0; c < 4; ++c) out.at(x, y, c) = image.at(sx, sy, c);
    }
  }
  return out;
}

IdealImage load_target(const std::filesystem::path& path, int desired_width) {
  return resample_nearest(to_ideal(read_png(path)), desired_width);
}

namespace {

template <typename Get>
Rgba8Image quantize(int width, int height, Get&& get) {
  Rgba8Image out{width, height, std::vector<std::uint8_t>(static_cast<size_t>(width) * height * 4)};
  auto q = [](double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); };
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      std::uint8_t* p = &out.pixels[(static_cast<size_t>(y) * width + x) * 4];
      const double a = std::clamp(static_cast<double>(get(x, y, 3)), 0.0, 1.0);
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(static_cast<double>(get(x, y, c)), 0.0, 1.0);
        p[c] = q(a > 0.0 ? std::min(1.0, v / a) : 0.0);
      }
      p[3] = q(a);
    }
  }
  return out;
}

}  // namespace

Rgba8Image render_rgba(const CellGrid& grid) {
  return quantize(grid.width(), grid.height(), [&](int x, int y, int c) { return grid.at(x, y, c); });
}

Rgba8Image render_rgba(const IdealImage& image) {
  return quantize(image.width(), image.height(), [&](int x, int y, int c) { return image.at(x, y, c); });
}

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  size_t start = 0;
  for (;;) {
    const size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view s, std::string_view what) {
  s = trim(s);
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kInvalidArgument, "cannot parse " + std::string(what) + " from '" + std::string(s) + "'");
  }
  return value;
}

}  // namespace

std::string format_results_csv(std::span<const MetricRecord> records) {
  std::string out(kResultsHeader);
  out += '\n';
  for (const MetricRecord& r : records) {
    const ExperimentConfig& c = r.config;
    out += to_char(c.variant);
    out += ',' + std::to_string(c.seed_time_delta) + ',' + std::to_string(c.lateral_distance) + ',' +
           std::to_string(c.offset_a) + ',' + std::to_string(c.offset_b) + ',' + fmt("%g", c.seed_identity_a) + ',' +
           fmt("%g", c.seed_identity_b) + ',' + fmt("%.9g", r.rmse) + ',' + std::to_string(r.bbox_dx) + ',' +
           std::to_string(r.bbox_dy) + ',' + fmt("%.9g", r.area_ratio) + ',' + (r.moved ? "1" : "0") + ',' +
           (r.died ? "1" : "0") + '\n';
  }
  return out;
}

std::string format_traces_csv(std::span<const MetricRecord> records) {
  size_t steps = 0;
  for (const MetricRecord& r : records) steps = std::max(steps, r.error_trace.size());
  std::string out = "config_index";
  for (size_t t = 1; t <= steps; ++t) out += ",step_" + std::to_string(t);
  out += '\n';
  for (const MetricRecord& r : records) {
    out += std::to_string(r.config.index);
    for (double v : r.error_trace) out += ',' + fmt("%.7g", v);
    out += '\n';
  }
  return out;
}

// Malformed input files are reported as I/O errors.
std::vector<MetricRecord> parse_results_csv(std::string_view text) try {
  std::vector<MetricRecord> out;
  bool header = true;
  int index = 0;
  size_t line_no = 0;
  for (std::string_view line : split(text, '\n')) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (header) {
      if (line != kResultsHeader) throw Error(ErrorCode::kInvalidArgument, "unexpected results CSV header");
      header = false;
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 13 || f[0].size() != 1) {
      throw Error(ErrorCode::kInvalidArgument, "malformed results CSV line " + std::to_string(line_no));
    }
    MetricRecord r;
    r.config.index = index++;
    r.config.variant = parse_variant(f[0][0]);
    r.config.seed_time_delta = parse_number<int>(f[1], "seed_time");
    r.config.lateral_distance = parse_number<int>(f[2], "lateral_distance");
    r.config.offset_a = parse_number<int>(f[3], "offset_a");
    r.config.offset_b = parse_number<int>(f[4], "offset_b");
    r.config.seed_identity_a = parse_number<double>(f[5], "seed_id_a");
    r.config.seed_identity_b = parse_number<double>(f[6], "seed_id_b");
    r.rmse = parse_number<double>(f[7], "rmse");
    r.bbox_dx = parse_number<int>(f[8], "bbox_dx");
    r.bbox_dy = parse_number<int>(f[9], "bbox_dy");
    r.area_ratio = parse_number<double>(f[10], "area_ratio");
    r.moved = parse_number<int>(f[11], "moved") != 0;
    r.died = parse_number<int>(f[12], "died") != 0;
    out.push_back(std::move(r));
  }
  if (header) throw Error(ErrorCode::kInvalidArgument, "results CSV is empty");
  return out;
} catch (const Error& e) {
  if (e.code() != ErrorCode::kInvalidArgument) throw;
  throw Error(ErrorCode::kIo, e.what());
}

std::string format_stats_csv(const GroupedReport& report) {
  std::string out = "group,model_a,model_b,n_a,n_b,u,p,a_measure,significant,magnitude,method\n";
  for (const ComparisonRow& row : report.rows) {
    const StatResult& s = row.result;
    out += std::to_string(row.group) + ',' + row.first + ',' + row.second + ',' + std::to_string(row.first_n) + ',' +
           std::to_string(row.second_n) + ',' + fmt("%.9g", s.u_statistic) + ',' + fmt("%.6g", s.p_value) + ',' +
           fmt("%.6f", s.a_measure) + ',' + (s.significant ? "1" : "0") + ',' + std::string(to_string(s.magnitude)) +
           ',' + (s.exact ? "exact" : "normal") + '\n';
  }
  return out;
}

std::string format_stats_table(const GroupedReport& report) {
  std::vector<std::pair<char, char>> pairs;
  std::vector<int> groups;
  for (const ComparisonRow& row : report.rows) {
    if (std::find(pairs.begin(), pairs.end(), std::pair{row.first, row.second}) == pairs.end()) {
      pairs.emplace_back(row.first, row.second);
    }
    if (std::find(groups.begin(), groups.end(), row.group) == groups.end()) groups.push_back(row.group);
  }
  std::sort(groups.rbegin(), groups.rend());
  constexpr int kCell = 28;
  auto pad = [](std::string s, size_t n) {
    if (s.size() < n) s.append(n - s.size(), ' ');
    return s;
  };
  std::ostringstream out;
  out << pad("Group", 8);
  for (const auto& [a, b] : pairs) out << "| " << pad(std::string(1, a) + " / " + b, kCell);
  out << '\n' << std::string(8 + pairs.size() * (kCell + 2), '-') << '\n';
  for (int g : groups) {
    std::string p_line = pad(std::to_string(g), 8);
    std::string a_line = pad("", 8);
    for (const auto& [a, b] : pairs) {
      const auto it = std::find_if(report.rows.begin(), report.rows.end(), [&](const ComparisonRow& r) {
        return r.group == g && r.first == a && r.second == b;
      });
      if (it == report.rows.end()) {
        p_line += "| " + pad("-", kCell);
        a_line += "| " + pad("", kCell);
        continue;
      }
      const StatResult& s = it->result;
      const std::string p = fmt("%.3g", s.p_value);
      p_line += "| " + pad(s.significant ? "p=" + p : "Not significant (p=" + p + ")", kCell);
      a_line += "| " + pad("A=" + fmt("%.2f", s.a_measure) + " " + std::string(to_string(s.magnitude)), kCell);
    }
    out << p_line << '\n' << a_line << '\n';
  }
  out << "Significance threshold p < " << fmt("%.5g", report.threshold) << " (Bonferroni)";
  bool any_exact = false;
  bool any_normal = false;
  for (const ComparisonRow& row : report.rows) (row.result.exact ? any_exact : any_normal) = true;
  out << "; Mann-Whitney p from " << (any_exact && any_normal ? "exact and normal" : any_exact ? "exact" : "normal")
      << " branch\n";
  for (const std::string& w : report.warnings) out << "warning: " << w << '\n';
  return out.str();
}

std::string format_loss_csv(std::span<const IterationStats> history, Variant variant) {
  std::string out = "iteration,loss,lr,variant\n";
  for (const IterationStats& s : history) {
    out += std::to_string(s.iteration) + ',' + fmt("%.9g", s.loss) + ',' + fmt("%g", s.learning_rate) + ',' +
           to_char(variant) + '\n';
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

std::map<std::string, std::string> parse_key_values(std::string_view text) {
  std::map<std::string, std::string> out;
  size_t line_no = 0;
  for (std::string_view line : split(text, '\n')) {
    ++line_no;
    if (const size_t hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::kInvalidArgument, "config line " + std::to_string(line_no) + " has no '='");
    }
    out[std::string(trim(line.substr(0, eq)))] = std::string(trim(line.substr(eq + 1)));
  }
  return out;
}

void apply_train_settings(TrainConfig& config, const std::map<std::string, std::string>& settings) {
  for (const auto& [key, value] : settings) {
    if (key == "variant") {
      if (value.size() != 1) throw Error(ErrorCode::kInvalidArgument, "variant must be A, B or C");
      config.variant = parse_variant(value[0]);
    } else if (key == "grid_width") {
      config.grid_width = parse_number<int>(value, key);
    } else if (key == "grid_height") {
      config.grid_height = parse_number<int>(value, key);
    } else if (key == "batch_size") {
      config.batch_size = parse_number<int>(value, key);
    } else if (key == "pool_size") {
      config.pool_size = parse_number<int>(value, key);
    } else if (key == "iterations") {
      config.iterations = parse_number<int>(value, key);
    } else if (key == "min_rollout") {
      config.min_rollout = parse_number<int>(value, key);
    } else if (key == "max_rollout") {
      config.max_rollout = parse_number<int>(value, key);
    } else if (key == "learning_rate") {
      config.learning_rate = parse_number<double>(value, key);
    } else if (key == "lr_halve_at") {
      config.lr_halve_at = parse_number<int>(value, key);
    } else if (key == "fire_rate") {
      config.fire_rate = parse_number<double>(value, key);
    } else if (key == "identity_weight") {
      config.identity_weight = parse_number<double>(value, key);
    } else if (key == "seed") {
      config.seed = parse_number<std::uint64_t>(value, key);
    } else if (key == "workers") {
      config.workers = parse_number<int>(value, key);
    } else {
      throw Error(ErrorCode::kInvalidArgument, "unknown training setting '" + key + "'");
    }
  }
}

}  // namespace nca
