#pragma once

// Checkpoints, PNG targets and frames, CSV tables and key=value config files.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nca/experiment.hpp"
#include "nca/grid.hpp"
#include "nca/model.hpp"
#include "nca/stats.hpp"
#include "nca/training.hpp"

namespace nca {

// ---------------------------------------------------------------------------
// Checkpoints
//
// Little-endian layout:
//   "NCAW" | u32 version | u32 channels (17) | u32 hidden (128)
//   | u32 perception multiplier (3) | u8 variant ('A'/'B'/'C') | f32 fire rate
//   | f32 w1[51 * 128] | f32 b1[128] | f32 w2[128 * 17] | f32 b2[17]   (row-major)
//   | u32 metadata length | metadata bytes (UTF-8)
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelWeights weights;
  std::string metadata;
};

std::vector<std::uint8_t> encode_checkpoint(const ModelWeights& weights, std::string_view metadata = {});
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const ModelWeights& weights, const std::filesystem::path& path, std::string_view metadata = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------

struct Rgba8Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // straight (non-premultiplied) RGBA, row-major
};

// Only 8-bit RGBA files are accepted.
Rgba8Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Rgba8Image& image);

// Scales to [0, 1] and premultiplies RGB by alpha.
IdealImage to_ideal(const Rgba8Image& image);

// Nearest-neighbor resample to `desired_width`, preserving aspect ratio.
// A non-positive width keeps the native size.
IdealImage resample_nearest(const IdealImage& image, int desired_width);

IdealImage load_target(const std::filesystem::path& path, int desired_width);

// Clamp to [0, 1], un-premultiply where alpha > 0, quantize to 8 bits.
Rgba8Image render_rgba(const CellGrid& grid);
Rgba8Image render_rgba(const IdealImage& image);

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline constexpr std::string_view kResultsHeader =
    "variant,seed_time,lateral_distance,offset_a,offset_b,seed_id_a,seed_id_b,rmse,bbox_dx,bbox_dy,area_ratio,moved,"
    "died";

std::string format_results_csv(std::span<const MetricRecord> records);
// Wide format: config_index followed by one RMSE per step.
std::string format_traces_csv(std::span<const MetricRecord> records);

// Parses a results CSV written by format_results_csv. Error traces are not
// part of that file and come back empty.
std::vector<MetricRecord> parse_results_csv(std::string_view text);

std::string format_stats_csv(const GroupedReport& report);
// Aligned table: one row per group, one column per model pair, p and A per cell.
std::string format_stats_table(const GroupedReport& report);

std::string format_loss_csv(std::span<const IterationStats> history, Variant variant);

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

// key=value lines; '#' starts a comment; blank lines ignored.
std::map<std::string, std::string> parse_key_values(std::string_view text);

// Applies recognised keys onto `config`; unknown keys raise kInvalidArgument.
void apply_train_settings(TrainConfig& config, const std::map<std::string, std::string>& settings);

}  // namespace nca
