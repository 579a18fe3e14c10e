// IDX ingestion, M-way column sharding, and replication for scaling runs.
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <zlib.h>

#include "kdlw/common.hpp"
#include "kdlw/topology.hpp"

namespace kdlw {

enum class Split { train, valid, test };

struct Dataset {
    Matrix images;            // samples x pixels, values in [0,1]
    std::vector<int> labels;  // 0..9
    Split split = Split::train;

    int size() const { return images.rows; }
    int cols() const { return images.cols; }
};

struct ShardedDataset {
    std::vector<Matrix> shards;  // shard m holds section m's pixel columns
    std::vector<int> labels;     // held once, core-side
};

namespace detail {

inline std::vector<uint8_t> read_file_maybe_gzip(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    std::vector<uint8_t> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (raw.size() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b) {
        std::vector<uint8_t> out;
        z_stream zs{};
        if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw IoError("inflateInit failed");
        zs.next_in = raw.data();
        zs.avail_in = static_cast<uInt>(raw.size());
        std::array<uint8_t, 1 << 16> buf;
        int rc = Z_OK;
        while (rc != Z_STREAM_END) {
            zs.next_out = buf.data();
            zs.avail_out = static_cast<uInt>(buf.size());
            rc = inflate(&zs, Z_NO_FLUSH);
            if (rc != Z_OK && rc != Z_STREAM_END) {
                inflateEnd(&zs);
                throw IoError("gzip decompression failed: " + path);
            }
            out.insert(out.end(), buf.data(), buf.data() + (buf.size() - zs.avail_out));
        }
        inflateEnd(&zs);
        return out;
    }
    return raw;
}

inline uint32_t be32(const std::vector<uint8_t>& b, size_t off) {
    if (off + 4 > b.size()) throw IoError("truncated IDX header");
    return (uint32_t(b[off]) << 24) | (uint32_t(b[off + 1]) << 16) | (uint32_t(b[off + 2]) << 8) |
           uint32_t(b[off + 3]);
}

}  // namespace detail

// IDX pair loader; magics 0x803 (images) / 0x801 (labels), big-endian
// dimensions, pixel bytes scaled to [0,1]. Transparently ungzips.
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                        Split split = Split::train) {
    const auto img = detail::read_file_maybe_gzip(images_path);
    const auto lab = detail::read_file_maybe_gzip(labels_path);
    if (detail::be32(img, 0) != 0x00000803u)
        throw IoError("bad IDX magic in images file: " + images_path);
    if (detail::be32(lab, 0) != 0x00000801u)
        throw IoError("bad IDX magic in labels file: " + labels_path);
    const uint32_t n_img = detail::be32(img, 4);
    const uint32_t rows = detail::be32(img, 8);
    const uint32_t cols = detail::be32(img, 12);
    const uint32_t n_lab = detail::be32(lab, 4);
    if (n_img != n_lab)
        throw IoError("image/label count mismatch: " + std::to_string(n_img) + " vs " +
                      std::to_string(n_lab));
    const size_t pixels = size_t(rows) * cols;
    if (img.size() != 16 + size_t(n_img) * pixels) throw IoError("truncated images file: " + images_path);
    if (lab.size() != 8 + size_t(n_lab)) throw IoError("truncated labels file: " + labels_path);
    Dataset ds;
    ds.split = split;
    ds.images = Matrix(static_cast<int>(n_img), static_cast<int>(pixels));
    for (size_t e = 0; e < size_t(n_img) * pixels; ++e)
        ds.images.data[e] = img[16 + e] / 255.0;
    ds.labels.assign(lab.begin() + 8, lab.end());
    return ds;
}

// FNV-1a over the bit patterns of pixels and labels; a reproducibility
// fingerprint, not a cryptographic hash.
inline std::string fingerprint(const Dataset& ds) {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const void* p, size_t n) {
        const auto* b = static_cast<const uint8_t*>(p);
        for (size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ULL;
        }
    };
    const int64_t dims[2] = {ds.images.rows, ds.images.cols};
    mix(dims, sizeof dims);
    mix(ds.images.data.data(), ds.images.data.size() * sizeof(double));
    for (int l : ds.labels) {
        const int64_t v = l;
        mix(&v, sizeof v);
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// Column-contiguous M-way shard per the section remainder rule; lossless.
inline ShardedDataset split_m(const Dataset& data, int m) {
    if (m < 1) throw ConfigError("shard count must be >= 1");
    if (m > data.cols()) throw ConfigError("shard count exceeds pixel count");
    const auto widths = section_widths(data.cols(), m);
    ShardedDataset out;
    out.labels = data.labels;
    int start = 0;
    for (int s = 0; s < m; ++s) {
        Matrix shard(data.size(), widths[s]);
        for (int r = 0; r < data.size(); ++r)
            std::copy(data.images.row(r) + start, data.images.row(r) + start + widths[s],
                      shard.row(r));
        out.shards.push_back(std::move(shard));
        start += widths[s];
    }
    return out;
}

inline Dataset reassemble(const ShardedDataset& sharded, Split split = Split::train) {
    Dataset out;
    out.split = split;
    out.labels = sharded.labels;
    int cols = 0, rows = sharded.shards.empty() ? 0 : sharded.shards[0].rows;
    for (const auto& s : sharded.shards) cols += s.cols;
    out.images = Matrix(rows, cols);
    int start = 0;
    for (const auto& s : sharded.shards) {
        for (int r = 0; r < rows; ++r)
            std::copy(s.row(r), s.row(r) + s.cols, out.images.row(r) + start);
        start += s.cols;
    }
    return out;
}

// X-fold replication with a seeded shuffle of the concatenation.
inline Dataset replicate_x(const Dataset& data, int x, uint64_t seed) {
    if (x < 1) throw ConfigError("replication factor must be >= 1");
    std::vector<int> order;
    order.reserve(static_cast<size_t>(data.size()) * x);
    for (int rep = 0; rep < x; ++rep)
        for (int i = 0; i < data.size(); ++i) order.push_back(i);
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    Dataset out;
    out.split = data.split;
    out.images = Matrix(static_cast<int>(order.size()), data.cols());
    for (size_t r = 0; r < order.size(); ++r) {
        std::copy(data.images.row(order[r]), data.images.row(order[r]) + data.cols(),
                  out.images.row(static_cast<int>(r)));
        out.labels.push_back(data.labels[order[r]]);
    }
    return out;
}

// First-n-per-class subsample, original order otherwise preserved.
inline Dataset take_per_class(const Dataset& data, int per_class) {
    std::map<int, int> taken;
    Dataset out;
    out.split = data.split;
    std::vector<int> keep;
    for (int i = 0; i < data.size(); ++i)
        if (taken[data.labels[i]]++ < per_class) keep.push_back(i);
    out.images = Matrix(static_cast<int>(keep.size()), data.cols());
    for (size_t r = 0; r < keep.size(); ++r) {
        std::copy(data.images.row(keep[r]), data.images.row(keep[r]) + data.cols(),
                  out.images.row(static_cast<int>(r)));
        out.labels.push_back(data.labels[keep[r]]);
    }
    return out;
}

inline Dataset take_range(const Dataset& data, int start, int stop, Split split) {
    Dataset out;
    out.split = split;
    out.images = Matrix(stop - start, data.cols());
    for (int r = start; r < stop; ++r) {
        std::copy(data.images.row(r), data.images.row(r) + data.cols(), out.images.row(r - start));
        out.labels.push_back(data.labels[r]);
    }
    return out;
}

}  // namespace kdlw
