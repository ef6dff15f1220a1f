#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vortexlab/rng.hpp"
#include "vortexlab/tensor.hpp"

namespace vortexlab::data {

struct Vec2 {
    double y = 0.0;
    double z = 0.0;
};

/// Ground-truth or predicted center pair; port is the larger-y vortex.
struct VortexCenters {
    Vec2 port;
    Vec2 star;
};

struct LidarPoint {
    double y = 0.0;
    double z = 0.0;
    double vr = 0.0;
};

/// One LiDAR scan: lateral position, height, radial velocity per point.
struct PointCloudFrame {
    std::vector<LidarPoint> points;
    double timestamp = 0.0;
    bool dropout_halved = false;
};

struct ScanSequence {
    std::string event_id;
    int chunk_index = 0;
    std::vector<PointCloudFrame> frames;
    std::optional<int> class_id;
    std::optional<std::vector<VortexCenters>> centers; // per frame
    Vec2 centroid_removed;
    bool centered = false;

    std::string id() const {
        return chunk_index == 0 ? event_id : event_id + "#" + std::to_string(chunk_index);
    }
};

struct SplitSpec {
    std::vector<std::string> train;
    std::vector<std::string> val;
    std::vector<std::string> test;
    std::array<double, 3> ratios{0.7, 0.2, 0.1};
    uint64_t seed = 0;
};

/// Non-overlapping chunking into fixed-length segments; the trailing
/// remainder is discarded and recordings shorter than T are dropped.
std::vector<ScanSequence> chunk_sequences(const ScanSequence& recording, int T = 5);

/// Translate (y,z) of every point and label by minus the single centroid over
/// all points across all frames; v_r untouched. Returns the removed centroid.
Vec2 center_sequence(ScanSequence& seq);

/// Subsample without replacement when over N, pad by resampling with
/// replacement when under; identity at N.
void normalize_point_count(PointCloudFrame& frame, int n, Rng& rng);

/// Deterministic shuffled partition by sequence id.
SplitSpec split_dataset(std::vector<std::string> ids, std::array<double, 3> ratios,
                        uint64_t seed);

// ---------------------------------------------------------------------------
// Dataset directory layout: one directory per sequence with manifest.json and
// frame_<k>.csv (header y,z,vr; 9 significant digits). Sealed labels for
// unlabeled datasets live in <dir>/_oracle/labels.json.
// ---------------------------------------------------------------------------

struct SequenceLabels {
    int class_id = -1;
    std::vector<VortexCenters> centers;
    nlohmann::json scenario; // full scenario snapshot for re-simulation
};

struct Dataset {
    std::vector<ScanSequence> sequences;
    bool labeled = false;
    nlohmann::json manifest;
};

void write_sequence_dir(const std::filesystem::path& dir, const ScanSequence& seq,
                        const nlohmann::json& scenario, bool include_labels);
ScanSequence load_sequence_dir(const std::filesystem::path& dir);

void write_dataset_manifest(const std::filesystem::path& dir, const nlohmann::json& manifest);
void write_oracle_labels(const std::filesystem::path& dir,
                         const std::map<std::string, SequenceLabels>& labels);
std::map<std::string, SequenceLabels> load_oracle_labels(const std::filesystem::path& dir);

Dataset load_dataset(const std::filesystem::path& dir);
/// Labels for every sequence: inline for labeled datasets, sidecar otherwise.
std::map<std::string, SequenceLabels> load_labels(const std::filesystem::path& dir);

nlohmann::json load_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Checkpoints (*.vxck): JSON header (names, shapes, offsets, checksums,
// hyperparameters, step, seed) followed by little-endian float32 blobs.
// ---------------------------------------------------------------------------

struct Checkpoint {
    std::map<std::string, Tensor<float>> tensors;
    nlohmann::json hyper;
    long step = 0;
    uint64_t master_seed = 0;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

uint32_t crc32(const void* data, size_t nbytes);

// ---------------------------------------------------------------------------
// Metric log: metrics.csv with columns epoch,split,loss,alignment,uniformity,lr
// ---------------------------------------------------------------------------

struct MetricRecord {
    int epoch = 0;
    std::string split;
    double loss = 0.0;
    double alignment = 0.0;
    double uniformity = 0.0;
    double lr = 0.0;
};

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<MetricRecord>& records);
std::vector<MetricRecord> load_metrics_csv(const std::filesystem::path& path);

/// Exactly 9 significant digits, the dataset CSV contract.
std::string format_g9(double v);

} // namespace vortexlab::data
