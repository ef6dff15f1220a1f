#include "vortexlab/dataio.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "vortexlab/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace vortexlab::data {

std::string format_g9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::vector<ScanSequence> chunk_sequences(const ScanSequence& recording, int T) {
    if (T < 1) throw std::invalid_argument("chunk_sequences: T must be >= 1");
    std::vector<ScanSequence> out;
    const int n = static_cast<int>(recording.frames.size());
    const int n_chunks = n / T;
    for (int k = 0; k < n_chunks; ++k) {
        ScanSequence chunk;
        chunk.event_id = recording.event_id;
        chunk.chunk_index = k;
        chunk.class_id = recording.class_id;
        chunk.frames.assign(recording.frames.begin() + static_cast<size_t>(k) * T,
                            recording.frames.begin() + static_cast<size_t>(k + 1) * T);
        if (recording.centers) {
            chunk.centers.emplace(recording.centers->begin() + static_cast<size_t>(k) * T,
                                  recording.centers->begin() + static_cast<size_t>(k + 1) * T);
        }
        out.push_back(std::move(chunk));
    }
    return out;
}

Vec2 center_sequence(ScanSequence& seq) {
    long n = 0;
    double sy = 0.0, sz = 0.0;
    for (const auto& f : seq.frames)
        for (const auto& p : f.points) {
            sy += p.y;
            sz += p.z;
            ++n;
        }
    if (n == 0) throw std::invalid_argument("center_sequence: empty sequence");
    const Vec2 mu{sy / n, sz / n};
    for (auto& f : seq.frames)
        for (auto& p : f.points) {
            p.y -= mu.y;
            p.z -= mu.z;
        }
    if (seq.centers) {
        for (auto& c : *seq.centers) {
            c.port.y -= mu.y;
            c.port.z -= mu.z;
            c.star.y -= mu.y;
            c.star.z -= mu.z;
        }
    }
    seq.centroid_removed.y += mu.y;
    seq.centroid_removed.z += mu.z;
    seq.centered = true;
    return mu;
}

void normalize_point_count(PointCloudFrame& frame, int n, Rng& rng) {
    const int count = static_cast<int>(frame.points.size());
    if (count == 0) throw std::invalid_argument("normalize_point_count: empty frame");
    if (n < 1) throw std::invalid_argument("normalize_point_count: N must be >= 1");
    if (count == n) return;
    if (count > n) {
        const std::vector<int> keep = rng.sample_without_replacement(count, n);
        std::vector<LidarPoint> out;
        out.reserve(n);
        for (int i : keep) out.push_back(frame.points[i]);
        frame.points = std::move(out);
        return;
    }
    frame.points.reserve(n);
    for (int i = count; i < n; ++i)
        frame.points.push_back(frame.points[rng.uniform_int(0, count - 1)]);
}

SplitSpec split_dataset(std::vector<std::string> ids, std::array<double, 3> ratios,
                        uint64_t seed) {
    const double sum = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("split_dataset: ratios must sum to 1");
    std::sort(ids.begin(), ids.end()); // canonical order before the shuffle
    Rng rng = rng_stream(seed, {Rng::key("split")});
    rng.shuffle(ids);
    const int n = static_cast<int>(ids.size());
    const int n_train = static_cast<int>(std::floor(ratios[0] * n));
    const int n_val = static_cast<int>(std::floor(ratios[1] * n));
    const int n_test = n - n_train - n_val;
    if ((ratios[0] > 0 && n_train == 0) || (ratios[1] > 0 && n_val == 0) ||
        (ratios[2] > 0 && n_test == 0))
        throw std::invalid_argument("split_dataset: fewer sequences than splits");
    SplitSpec spec;
    spec.ratios = ratios;
    spec.seed = seed;
    spec.train.assign(ids.begin(), ids.begin() + n_train);
    spec.val.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
    spec.test.assign(ids.begin() + n_train + n_val, ids.end());
    return spec;
}

// ---------------------------------------------------------------------------
// JSON + dataset directories
// ---------------------------------------------------------------------------

json load_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw runtime_error_("cannot open " + path.string());
    json j;
    in >> j;
    return j;
}

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw runtime_error_("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

static json centers_to_json(const std::vector<VortexCenters>& centers) {
    json arr = json::array();
    for (const auto& c : centers)
        arr.push_back({{c.port.y, c.port.z}, {c.star.y, c.star.z}});
    return arr;
}

static std::vector<VortexCenters> centers_from_json(const json& arr) {
    std::vector<VortexCenters> out;
    for (const auto& c : arr) {
        VortexCenters v;
        v.port = {c[0][0].get<double>(), c[0][1].get<double>()};
        v.star = {c[1][0].get<double>(), c[1][1].get<double>()};
        out.push_back(v);
    }
    return out;
}

void write_sequence_dir(const fs::path& dir, const ScanSequence& seq, const json& scenario,
                        bool include_labels) {
    fs::create_directories(dir);
    json manifest;
    manifest["sequence_id"] = seq.id();
    manifest["n_frames"] = seq.frames.size();
    json ts = json::array();
    json halved = json::array();
    for (const auto& f : seq.frames) {
        ts.push_back(f.timestamp);
        halved.push_back(f.dropout_halved);
    }
    manifest["timestamps"] = ts;
    manifest["dropout_halved"] = halved;
    if (include_labels) {
        if (seq.class_id) manifest["class_id"] = *seq.class_id;
        if (!scenario.is_null()) manifest["scenario"] = scenario;
        if (seq.centers) manifest["centers"] = centers_to_json(*seq.centers);
    }
    write_json_file(dir / "manifest.json", manifest);
    for (size_t k = 0; k < seq.frames.size(); ++k) {
        std::ofstream out(dir / ("frame_" + std::to_string(k) + ".csv"));
        if (!out) throw runtime_error_("cannot write frame csv in " + dir.string());
        out << "y,z,vr\n";
        for (const auto& p : seq.frames[k].points)
            out << format_g9(p.y) << "," << format_g9(p.z) << "," << format_g9(p.vr) << "\n";
    }
}

ScanSequence load_sequence_dir(const fs::path& dir) {
    const json manifest = load_json_file(dir / "manifest.json");
    ScanSequence seq;
    seq.event_id = manifest.at("sequence_id").get<std::string>();
    const int n = manifest.at("n_frames").get<int>();
    const auto& ts = manifest.at("timestamps");
    for (int k = 0; k < n; ++k) {
        PointCloudFrame f;
        f.timestamp = ts[k].get<double>();
        if (manifest.contains("dropout_halved")) f.dropout_halved = manifest["dropout_halved"][k];
        std::ifstream in(dir / ("frame_" + std::to_string(k) + ".csv"));
        if (!in) throw runtime_error_("missing frame csv in " + dir.string());
        std::string line;
        std::getline(in, line); // header
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            LidarPoint p;
            if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &p.y, &p.z, &p.vr) != 3)
                throw runtime_error_("bad csv row in " + dir.string() + ": " + line);
            f.points.push_back(p);
        }
        seq.frames.push_back(std::move(f));
    }
    if (manifest.contains("class_id")) seq.class_id = manifest["class_id"].get<int>();
    if (manifest.contains("centers")) seq.centers = centers_from_json(manifest["centers"]);
    return seq;
}

void write_dataset_manifest(const fs::path& dir, const json& manifest) {
    fs::create_directories(dir);
    write_json_file(dir / "dataset.json", manifest);
}

void write_oracle_labels(const fs::path& dir, const std::map<std::string, SequenceLabels>& labels) {
    fs::create_directories(dir / "_oracle");
    json j;
    for (const auto& [id, lab] : labels) {
        json e;
        e["class_id"] = lab.class_id;
        e["centers"] = centers_to_json(lab.centers);
        e["scenario"] = lab.scenario;
        j[id] = e;
    }
    write_json_file(dir / "_oracle" / "labels.json", j);
}

std::map<std::string, SequenceLabels> load_oracle_labels(const fs::path& dir) {
    const json j = load_json_file(dir / "_oracle" / "labels.json");
    std::map<std::string, SequenceLabels> out;
    for (auto it = j.begin(); it != j.end(); ++it) {
        SequenceLabels lab;
        lab.class_id = it.value().at("class_id").get<int>();
        lab.centers = centers_from_json(it.value().at("centers"));
        lab.scenario = it.value().at("scenario");
        out[it.key()] = lab;
    }
    return out;
}

Dataset load_dataset(const fs::path& dir) {
    Dataset ds;
    ds.manifest = load_json_file(dir / "dataset.json");
    ds.labeled = ds.manifest.at("labeled").get<bool>();
    for (const auto& id : ds.manifest.at("sequence_ids"))
        ds.sequences.push_back(load_sequence_dir(dir / id.get<std::string>()));
    return ds;
}

std::map<std::string, SequenceLabels> load_labels(const fs::path& dir) {
    const json manifest = load_json_file(dir / "dataset.json");
    if (!manifest.at("labeled").get<bool>()) return load_oracle_labels(dir);
    std::map<std::string, SequenceLabels> out;
    for (const auto& id : manifest.at("sequence_ids")) {
        const json m = load_json_file(dir / id.get<std::string>() / "manifest.json");
        SequenceLabels lab;
        lab.class_id = m.at("class_id").get<int>();
        lab.centers = centers_from_json(m.at("centers"));
        lab.scenario = m.at("scenario");
        out[id.get<std::string>()] = lab;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

uint32_t crc32(const void* data, size_t nbytes) {
    static uint32_t table[256];
    static bool init = false;
    if (!init) {
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            table[i] = c;
        }
        init = true;
    }
    uint32_t c = 0xFFFFFFFFu;
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < nbytes; ++i) c = table[(c ^ p[i]) & 0xFF] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

static constexpr char kCheckpointMagic[6] = {'V', 'X', 'C', 'K', '1', '\n'};

void save_checkpoint(const fs::path& path, const Checkpoint& ck) {
    json header;
    header["format"] = 1;
    header["step"] = ck.step;
    header["master_seed"] = ck.master_seed;
    header["hyper"] = ck.hyper;
    json tensors = json::array();
    uint64_t offset = 0;
    for (const auto& [name, t] : ck.tensors) {
        const uint64_t nbytes = static_cast<uint64_t>(t.numel()) * 4;
        json e;
        e["name"] = name;
        e["shape"] = t.shape;
        e["offset"] = offset;
        e["nbytes"] = nbytes;
        e["crc32"] = crc32(t.data.data(), nbytes);
        tensors.push_back(e);
        offset += nbytes;
    }
    header["tensors"] = tensors;
    const std::string hs = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw runtime_error_("cannot write checkpoint " + path.string());
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    const uint64_t hlen = hs.size();
    out.write(reinterpret_cast<const char*>(&hlen), 8);
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& [name, t] : ck.tensors)
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.numel()) * 4);
}

Checkpoint load_checkpoint(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw runtime_error_("cannot open checkpoint " + path.string());
    char magic[6];
    in.read(magic, 6);
    if (!in || std::memcmp(magic, kCheckpointMagic, 6) != 0)
        throw runtime_error_("checkpoint: corrupt header (bad magic) in " + path.string());
    uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), 8);
    if (!in || hlen == 0 || hlen > (1ull << 30))
        throw runtime_error_("checkpoint: corrupt header length in " + path.string());
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw runtime_error_("checkpoint: truncated header in " + path.string());
    json header;
    try {
        header = json::parse(hs);
    } catch (const json::exception&) {
        throw runtime_error_("checkpoint: corrupt header json in " + path.string());
    }
    Checkpoint ck;
    ck.step = header.at("step").get<long>();
    ck.master_seed = header.at("master_seed").get<uint64_t>();
    ck.hyper = header.at("hyper");
    for (const auto& e : header.at("tensors")) {
        const std::string name = e.at("name").get<std::string>();
        Tensor<float> t = Tensor<float>::zeros(e.at("shape").get<std::vector<int>>());
        const uint64_t nbytes = e.at("nbytes").get<uint64_t>();
        if (nbytes != static_cast<uint64_t>(t.numel()) * 4)
            throw runtime_error_("checkpoint: tensor size mismatch for " + name);
        in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(nbytes));
        if (!in) throw runtime_error_("checkpoint: truncated blob for " + name);
        if (crc32(t.data.data(), nbytes) != e.at("crc32").get<uint32_t>())
            throw runtime_error_("checkpoint: checksum mismatch for " + name);
        ck.tensors[name] = std::move(t);
    }
    return ck;
}

// ---------------------------------------------------------------------------
// Metric logs
// ---------------------------------------------------------------------------

void write_metrics_csv(const fs::path& path, const std::vector<MetricRecord>& records) {
    std::ofstream out(path);
    if (!out) throw runtime_error_("cannot write " + path.string());
    out << "epoch,split,loss,alignment,uniformity,lr\n";
    for (const auto& r : records)
        out << r.epoch << "," << r.split << "," << format_g9(r.loss) << ","
            << format_g9(r.alignment) << "," << format_g9(r.uniformity) << ","
            << format_g9(r.lr) << "\n";
}

std::vector<MetricRecord> load_metrics_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw runtime_error_("cannot open " + path.string());
    std::vector<MetricRecord> out;
    std::string line;
    std::getline(in, line); // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        MetricRecord r;
        std::stringstream ss(line);
        std::string field;
        std::getline(ss, field, ',');
        r.epoch = std::stoi(field);
        std::getline(ss, r.split, ',');
        std::getline(ss, field, ',');
        r.loss = std::stod(field);
        std::getline(ss, field, ',');
        r.alignment = std::stod(field);
        std::getline(ss, field, ',');
        r.uniformity = std::stod(field);
        std::getline(ss, field, ',');
        r.lr = std::stod(field);
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace vortexlab::data
