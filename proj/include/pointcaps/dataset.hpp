#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pointcaps/errors.hpp"
#include "pointcaps/rng.hpp"
#include "pointcaps/serialize.hpp"
#include "pointcaps/tensor.hpp"

// Point-cloud ingestion, synthesis, normalization, corruption and batching.
//
// File formats:
//  * OFF mesh: "OFF" header, counts line, vertex lines, face lines.
//  * xyz text: one "x y z" triple per line, whitespace separated, '#' comments.
//  * binary blob: "PCAP" | u16 version | u32 N | u16 d | u32 label | N*d f32 LE.
//  * directory layout: <root>/<class_name>/{train,test}/<files>; the class
//    index is the position in sorted class-name order.
//
// Corruption is applied after unit-sphere normalization and the result is
// not re-normalized: outlier replacements stay inside the unit ball, while
// Gaussian-perturbed points may exceed radius 1.

namespace pointcaps {

struct PointCloudSample {
    std::vector<float> points;  // N x 3, row major
    int label = 0;

    std::size_t n_points() const { return points.size() / 3; }
    float* point(std::size_t i) { return points.data() + 3 * i; }
    const float* point(std::size_t i) const { return points.data() + 3 * i; }
};

struct Dataset {
    std::vector<PointCloudSample> samples;
    std::vector<std::string> class_names;

    std::size_t size() const { return samples.size(); }
    std::size_t num_classes() const { return class_names.size(); }
};

struct CorruptionSpec {
    std::size_t outlier_count = 0;
    double perturb_std = 0.0;
    std::uint64_t seed = 0;

    bool is_identity() const { return outlier_count == 0 && perturb_std == 0.0; }
};

enum class PointFormat { off_mesh, xyz_points, binary_blob };
enum class OffSampling { surface, vertex };

struct LoadOptions {
    std::size_t n_points = 1024;
    std::uint64_t seed = 0;
    OffSampling off_sampling = OffSampling::surface;
    // meshes are surface-sampled to this pool size, then subsampled to n_points
    std::size_t surface_pool = 10000;
};

// ---------------------------------------------------------------------------
// Synthetic primitives
// ---------------------------------------------------------------------------

enum class PrimitiveShape { sphere, cube, cylinder, cone, torus };

inline const char* primitive_name(PrimitiveShape s) {
    switch (s) {
        case PrimitiveShape::sphere: return "sphere";
        case PrimitiveShape::cube: return "cube";
        case PrimitiveShape::cylinder: return "cylinder";
        case PrimitiveShape::cone: return "cone";
        case PrimitiveShape::torus: return "torus";
    }
    throw ArgumentError("unknown primitive");
}

inline PrimitiveShape primitive_from_name(const std::string& name) {
    if (name == "sphere") return PrimitiveShape::sphere;
    if (name == "cube") return PrimitiveShape::cube;
    if (name == "cylinder") return PrimitiveShape::cylinder;
    if (name == "cone") return PrimitiveShape::cone;
    if (name == "torus") return PrimitiveShape::torus;
    throw ArgumentError("unknown primitive shape '" + name + "'");
}

// Uniform surface sampling of a canonical primitive, centered at the origin.
// Characteristic sizes: sphere radius 1; cube half-edge 1; cylinder radius
// 0.5 and half-height 1; cone base radius 0.8 spanning z in [-1,1]; torus
// with ring radius 0.7 and tube radius 0.3.
inline PointCloudSample synthesize(PrimitiveShape shape, std::size_t n_points, std::uint64_t seed) {
    if (n_points < 8) throw ArgumentError("synthesize: n_points must be >= 8");
    Rng rng(splitmix64(seed) ^ (0xabcdULL + static_cast<std::uint64_t>(shape)));
    PointCloudSample s;
    s.points.resize(n_points * 3);
    auto put = [&](std::size_t i, double x, double y, double z) {
        s.points[3 * i] = static_cast<float>(x);
        s.points[3 * i + 1] = static_cast<float>(y);
        s.points[3 * i + 2] = static_cast<float>(z);
    };
    const double pi = 3.14159265358979323846;
    switch (shape) {
        case PrimitiveShape::sphere: {
            for (std::size_t i = 0; i < n_points; ++i) {
                double x = rng.normal(), y = rng.normal(), z = rng.normal();
                double n = std::sqrt(x * x + y * y + z * z);
                while (n < 1e-12) {
                    x = rng.normal(), y = rng.normal(), z = rng.normal();
                    n = std::sqrt(x * x + y * y + z * z);
                }
                put(i, x / n, y / n, z / n);
            }
            break;
        }
        case PrimitiveShape::cube: {
            for (std::size_t i = 0; i < n_points; ++i) {
                const std::size_t face = rng.uniform_index(6);
                const double u = rng.uniform(-1.0, 1.0);
                const double v = rng.uniform(-1.0, 1.0);
                const double w = face % 2 == 0 ? 1.0 : -1.0;
                if (face / 2 == 0) put(i, w, u, v);
                else if (face / 2 == 1) put(i, u, w, v);
                else put(i, u, v, w);
            }
            break;
        }
        case PrimitiveShape::cylinder: {
            const double r = 0.5, h = 2.0;
            const double side_area = 2.0 * pi * r * h;
            const double cap_area = pi * r * r;
            const double total = side_area + 2.0 * cap_area;
            for (std::size_t i = 0; i < n_points; ++i) {
                const double pick = rng.uniform(0.0, total);
                const double theta = rng.uniform(0.0, 2.0 * pi);
                if (pick < side_area) {
                    put(i, r * std::cos(theta), r * std::sin(theta), rng.uniform(-1.0, 1.0));
                } else {
                    const double rr = r * std::sqrt(rng.uniform());
                    const double z = pick < side_area + cap_area ? 1.0 : -1.0;
                    put(i, rr * std::cos(theta), rr * std::sin(theta), z);
                }
            }
            break;
        }
        case PrimitiveShape::cone: {
            const double r = 0.8, h = 2.0;  // apex at z=1, base disk at z=-1
            const double slant = std::sqrt(r * r + h * h);
            const double lateral_area = pi * r * slant;
            const double base_area = pi * r * r;
            for (std::size_t i = 0; i < n_points; ++i) {
                const double pick = rng.uniform(0.0, lateral_area + base_area);
                const double theta = rng.uniform(0.0, 2.0 * pi);
                if (pick < lateral_area) {
                    const double t = std::sqrt(rng.uniform());  // fraction from apex
                    const double rr = r * t;
                    put(i, rr * std::cos(theta), rr * std::sin(theta), 1.0 - h * t);
                } else {
                    const double rr = r * std::sqrt(rng.uniform());
                    put(i, rr * std::cos(theta), rr * std::sin(theta), -1.0);
                }
            }
            break;
        }
        case PrimitiveShape::torus: {
            const double R = 0.7, r = 0.3;
            for (std::size_t i = 0; i < n_points; ++i) {
                double phi, theta;
                // poloidal angle needs density (R + r cos t)/(R + r)
                while (true) {
                    theta = rng.uniform(0.0, 2.0 * pi);
                    if (rng.uniform() <= (R + r * std::cos(theta)) / (R + r)) break;
                }
                phi = rng.uniform(0.0, 2.0 * pi);
                const double ring = R + r * std::cos(theta);
                put(i, ring * std::cos(phi), ring * std::sin(phi), r * std::sin(theta));
            }
            break;
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// Normalization and corruption
// ---------------------------------------------------------------------------

// Subtract the centroid and scale so the farthest point has norm exactly 1.
inline PointCloudSample normalize_unit_sphere(PointCloudSample s) {
    const std::size_t n = s.n_points();
    if (n == 0) throw DegenerateInputError("normalize: empty point set");
    double cx = 0, cy = 0, cz = 0;
    for (std::size_t i = 0; i < n; ++i) {
        cx += s.points[3 * i];
        cy += s.points[3 * i + 1];
        cz += s.points[3 * i + 2];
    }
    cx /= static_cast<double>(n);
    cy /= static_cast<double>(n);
    cz /= static_cast<double>(n);
    double max_norm = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = s.points[3 * i] - cx;
        const double y = s.points[3 * i + 1] - cy;
        const double z = s.points[3 * i + 2] - cz;
        max_norm = std::max(max_norm, std::sqrt(x * x + y * y + z * z));
    }
    if (max_norm < 1e-12)
        throw DegenerateInputError("normalize: all points identical, zero scale");
    for (std::size_t i = 0; i < n; ++i) {
        s.points[3 * i] = static_cast<float>((s.points[3 * i] - cx) / max_norm);
        s.points[3 * i + 1] = static_cast<float>((s.points[3 * i + 1] - cy) / max_norm);
        s.points[3 * i + 2] = static_cast<float>((s.points[3 * i + 2] - cz) / max_norm);
    }
    return s;
}

// Replace `count` distinct points (chosen without replacement) with draws
// uniform in the unit ball. Labels and N are unchanged.
inline PointCloudSample corrupt_outliers(PointCloudSample s, std::size_t count, std::uint64_t seed) {
    const std::size_t n = s.n_points();
    if (count > n)
        throw ArgumentError("corrupt_outliers: count " + std::to_string(count) + " exceeds N " +
                            std::to_string(n));
    if (count == 0) return s;
    Rng rng(splitmix64(seed) ^ 0x0071e85ULL);
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + rng.uniform_index(n - i);
        std::swap(idx[i], idx[j]);
    }
    for (std::size_t i = 0; i < count; ++i) {
        const auto p = rng.unit_ball();
        s.points[3 * idx[i]] = static_cast<float>(p[0]);
        s.points[3 * idx[i] + 1] = static_cast<float>(p[1]);
        s.points[3 * idx[i] + 2] = static_cast<float>(p[2]);
    }
    return s;
}

// Add i.i.d. Gaussian noise per coordinate. No clipping.
inline PointCloudSample corrupt_perturb(PointCloudSample s, double std, std::uint64_t seed) {
    if (std < 0) throw ArgumentError("corrupt_perturb: std must be >= 0");
    if (std == 0.0) return s;
    Rng rng(splitmix64(seed) ^ 0x9e27b1ULL);
    for (auto& v : s.points) v = static_cast<float>(v + std * rng.normal());
    return s;
}

// Outlier replacement first, then perturbation.
inline PointCloudSample apply_corruption(PointCloudSample s, const CorruptionSpec& spec,
                                         std::uint64_t sample_stream) {
    const std::uint64_t base = splitmix64(spec.seed ^ splitmix64(sample_stream));
    s = corrupt_outliers(std::move(s), spec.outlier_count, base);
    s = corrupt_perturb(std::move(s), spec.perturb_std, base ^ 0x5eedULL);
    return s;
}

// Clean dataset plus one corrupted copy of every sample, shuffled by the
// spec seed. Labels are duplicated at 2x multiplicity.
inline Dataset build_training_mix(const Dataset& clean, const CorruptionSpec& spec) {
    Dataset mix;
    mix.class_names = clean.class_names;
    mix.samples.reserve(clean.samples.size() * 2);
    for (const auto& s : clean.samples) mix.samples.push_back(s);
    for (std::size_t i = 0; i < clean.samples.size(); ++i)
        mix.samples.push_back(apply_corruption(clean.samples[i], spec, i));
    Rng rng(splitmix64(spec.seed) ^ 0x317eULL);
    shuffle(mix.samples, rng);
    return mix;
}

// ---------------------------------------------------------------------------
// Batching
// ---------------------------------------------------------------------------

template <class S>
struct Batch {
    Tensor<S> points;  // B x N x 3
    std::vector<int> labels;
};

template <class S>
Tensor<S> points_to_tensor(const std::vector<const PointCloudSample*>& samples) {
    const std::size_t b = samples.size();
    const std::size_t n = samples[0]->n_points();
    std::vector<S> data;
    data.reserve(b * n * 3);
    for (const auto* s : samples) {
        if (s->n_points() != n)
            throw DimensionError("batch: inconsistent point counts " + std::to_string(n) + " vs " +
                                 std::to_string(s->n_points()));
        for (float v : s->points) data.push_back(static_cast<S>(v));
    }
    return Tensor<S>::from({b, n, 3}, std::move(data));
}

// Deterministic shuffled batches of fixed size; the final partial batch is
// dropped so every batch tensor has the same shape.
template <class S>
class BatchIterator {
  public:
    BatchIterator(const Dataset& ds, std::size_t batch_size, std::uint64_t shuffle_seed)
        : ds_(&ds), batch_size_(batch_size) {
        if (batch_size == 0) throw ArgumentError("batch_iterator: batch_size must be >= 1");
        order_.resize(ds.samples.size());
        for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
        Rng rng(splitmix64(shuffle_seed) ^ 0xba7c4ULL);
        shuffle(order_, rng);
    }

    std::size_t num_batches() const { return order_.size() / batch_size_; }

    std::optional<Batch<S>> next() {
        if (cursor_ + batch_size_ > order_.size()) return std::nullopt;
        std::vector<const PointCloudSample*> ptrs;
        Batch<S> batch;
        ptrs.reserve(batch_size_);
        for (std::size_t i = 0; i < batch_size_; ++i) {
            const auto& s = ds_->samples[order_[cursor_ + i]];
            ptrs.push_back(&s);
            batch.labels.push_back(s.label);
        }
        batch.points = points_to_tensor<S>(ptrs);
        cursor_ += batch_size_;
        return batch;
    }

  private:
    const Dataset* ds_;
    std::size_t batch_size_;
    std::size_t cursor_ = 0;
    std::vector<std::size_t> order_;
};

// ---------------------------------------------------------------------------
// File loaders
// ---------------------------------------------------------------------------

namespace detail {

inline ParseError parse_error(const std::string& file, std::size_t line, const std::string& what) {
    return ParseError(file + ":" + std::to_string(line) + ": " + what);
}

struct OffMesh {
    std::vector<std::array<double, 3>> vertices;
    std::vector<std::vector<std::size_t>> faces;
};

inline OffMesh read_off(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ParseError("cannot open " + path);
    std::string line;
    std::size_t lineno = 0;
    auto next_content_line = [&]() -> std::string {
        while (std::getline(is, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            if (line.find_first_not_of(" \t\r\n") != std::string::npos) return line;
        }
        throw parse_error(path, lineno, "unexpected end of OFF file");
    };
    std::string header = next_content_line();
    std::istringstream hs(header);
    std::string tag;
    hs >> tag;
    if (tag != "OFF") throw parse_error(path, lineno, "missing OFF header, got '" + tag + "'");
    std::size_t nv = 0, nf = 0, ne = 0;
    if (!(hs >> nv >> nf >> ne)) {  // counts may follow on the next line
        std::istringstream cs(next_content_line());
        if (!(cs >> nv >> nf >> ne)) throw parse_error(path, lineno, "malformed counts line");
    }
    OffMesh mesh;
    mesh.vertices.reserve(nv);
    for (std::size_t i = 0; i < nv; ++i) {
        std::istringstream vs(next_content_line());
        std::array<double, 3> v{};
        if (!(vs >> v[0] >> v[1] >> v[2])) throw parse_error(path, lineno, "malformed vertex");
        mesh.vertices.push_back(v);
    }
    for (std::size_t i = 0; i < nf; ++i) {
        std::istringstream fs(next_content_line());
        std::size_t cnt = 0;
        if (!(fs >> cnt) || cnt < 3) throw parse_error(path, lineno, "malformed face");
        std::vector<std::size_t> face(cnt);
        for (auto& ix : face) {
            if (!(fs >> ix) || ix >= mesh.vertices.size())
                throw parse_error(path, lineno, "face index out of range");
        }
        mesh.faces.push_back(std::move(face));
    }
    return mesh;
}

inline double triangle_area(const std::array<double, 3>& a, const std::array<double, 3>& b,
                            const std::array<double, 3>& c) {
    const double ux = b[0] - a[0], uy = b[1] - a[1], uz = b[2] - a[2];
    const double vx = c[0] - a[0], vy = c[1] - a[1], vz = c[2] - a[2];
    const double cx = uy * vz - uz * vy;
    const double cy = uz * vx - ux * vz;
    const double cz = ux * vy - uy * vx;
    return 0.5 * std::sqrt(cx * cx + cy * cy + cz * cz);
}

}  // namespace detail

// Area-weighted surface sampling: triangulate faces (fan), pick triangles by
// cumulative area, sample within each by the sqrt warp.
inline PointCloudSample sample_off_mesh(const std::string& path, const LoadOptions& opt) {
    const auto mesh = detail::read_off(path);
    PointCloudSample out;
    Rng rng(splitmix64(opt.seed) ^ fnv1a64(path));
    if (opt.off_sampling == OffSampling::vertex || mesh.faces.empty()) {
        if (mesh.vertices.empty()) throw SchemaError(path + ": OFF mesh has no vertices");
        std::vector<std::size_t> idx(mesh.vertices.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        shuffle(idx, rng);
        out.points.reserve(opt.n_points * 3);
        for (std::size_t i = 0; i < opt.n_points; ++i) {
            const auto& v = mesh.vertices[idx[i % idx.size()]];
            out.points.push_back(static_cast<float>(v[0]));
            out.points.push_back(static_cast<float>(v[1]));
            out.points.push_back(static_cast<float>(v[2]));
        }
        return out;
    }

    struct Tri {
        std::array<double, 3> a, b, c;
    };
    std::vector<Tri> tris;
    std::vector<double> cum_area;
    double total = 0;
    for (const auto& face : mesh.faces) {
        for (std::size_t i = 1; i + 1 < face.size(); ++i) {
            Tri t{mesh.vertices[face[0]], mesh.vertices[face[i]], mesh.vertices[face[i + 1]]};
            const double area = detail::triangle_area(t.a, t.b, t.c);
            if (area <= 0) continue;
            total += area;
            tris.push_back(t);
            cum_area.push_back(total);
        }
    }
    if (tris.empty()) throw SchemaError(path + ": OFF mesh has no non-degenerate faces");

    const std::size_t pool = std::max(opt.surface_pool, opt.n_points);
    std::vector<float> pool_pts;
    pool_pts.reserve(pool * 3);
    for (std::size_t i = 0; i < pool; ++i) {
        const double pick = rng.uniform(0.0, total);
        const std::size_t ti = static_cast<std::size_t>(
            std::lower_bound(cum_area.begin(), cum_area.end(), pick) - cum_area.begin());
        const Tri& t = tris[std::min(ti, tris.size() - 1)];
        const double r1 = std::sqrt(rng.uniform());
        const double r2 = rng.uniform();
        const double wa = 1.0 - r1, wb = r1 * (1.0 - r2), wc = r1 * r2;
        for (std::size_t d = 0; d < 3; ++d)
            pool_pts.push_back(static_cast<float>(wa * t.a[d] + wb * t.b[d] + wc * t.c[d]));
    }
    // subsample the pool without replacement
    std::vector<std::size_t> idx(pool);
    for (std::size_t i = 0; i < pool; ++i) idx[i] = i;
    for (std::size_t i = 0; i < opt.n_points; ++i) {
        const std::size_t j = i + rng.uniform_index(pool - i);
        std::swap(idx[i], idx[j]);
    }
    out.points.reserve(opt.n_points * 3);
    for (std::size_t i = 0; i < opt.n_points; ++i) {
        out.points.push_back(pool_pts[3 * idx[i]]);
        out.points.push_back(pool_pts[3 * idx[i] + 1]);
        out.points.push_back(pool_pts[3 * idx[i] + 2]);
    }
    return out;
}

inline PointCloudSample load_xyz(const std::string& path, const LoadOptions& opt) {
    std::ifstream is(path);
    if (!is) throw ParseError("cannot open " + path);
    PointCloudSample s;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        std::istringstream ls(line);
        double x, y, z;
        if (!(ls >> x >> y >> z)) throw detail::parse_error(path, lineno, "expected 'x y z'");
        std::string extra;
        if (ls >> extra) throw detail::parse_error(path, lineno, "trailing token '" + extra + "'");
        s.points.push_back(static_cast<float>(x));
        s.points.push_back(static_cast<float>(y));
        s.points.push_back(static_cast<float>(z));
    }
    const std::size_t n = s.n_points();
    if (n == 0) throw SchemaError(path + ": no points");
    if (opt.n_points != 0 && n != opt.n_points) {
        if (n < opt.n_points)
            throw SchemaError(path + ": has " + std::to_string(n) + " points, need " +
                              std::to_string(opt.n_points));
        // seeded subsample without replacement
        Rng rng(splitmix64(opt.seed) ^ fnv1a64(path));
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        for (std::size_t i = 0; i < opt.n_points; ++i) {
            const std::size_t j = i + rng.uniform_index(n - i);
            std::swap(idx[i], idx[j]);
        }
        PointCloudSample sub;
        sub.points.reserve(opt.n_points * 3);
        for (std::size_t i = 0; i < opt.n_points; ++i) {
            sub.points.push_back(s.points[3 * idx[i]]);
            sub.points.push_back(s.points[3 * idx[i] + 1]);
            sub.points.push_back(s.points[3 * idx[i] + 2]);
        }
        return sub;
    }
    return s;
}

inline void save_blob(const PointCloudSample& s, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open " + path + " for writing");
    os.write("PCAP", 4);
    detail::write_le<std::uint16_t>(os, 1);
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.n_points()));
    detail::write_le<std::uint16_t>(os, 3);
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.label));
    for (float v : s.points) detail::write_le<float>(os, v);
    if (!os) throw Error("write failure on " + path);
}

inline PointCloudSample load_blob(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError("cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "PCAP") throw ParseError(path + ": bad magic, expected PCAP");
    const auto version = detail::read_le<std::uint16_t>(is, "blob version");
    if (version != 1) throw ParseError(path + ": unsupported blob version");
    const auto n = detail::read_le<std::uint32_t>(is, "point count");
    const auto d = detail::read_le<std::uint16_t>(is, "point dimension");
    if (d != 3) throw SchemaError(path + ": expected dimension 3, got " + std::to_string(d));
    PointCloudSample s;
    s.label = static_cast<int>(detail::read_le<std::uint32_t>(is, "label"));
    s.points.resize(static_cast<std::size_t>(n) * 3);
    for (auto& v : s.points) v = detail::read_le<float>(is, "point data");
    return s;
}

// Load one split ("train" or "test") from the directory layout. Class index
// is assigned by sorted class-name order; a blob whose embedded label
// disagrees with its directory is a schema error.
inline Dataset load_split(const std::string& root, const std::string& split, PointFormat format,
                          const LoadOptions& opt) {
    namespace fs = std::filesystem;
    if (!fs::exists(root)) throw ParseError("dataset root does not exist: " + root);
    Dataset ds;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory()) ds.class_names.push_back(e.path().filename().string());
    std::sort(ds.class_names.begin(), ds.class_names.end());
    if (ds.class_names.empty()) throw SchemaError(root + ": no class directories");
    for (std::size_t ci = 0; ci < ds.class_names.size(); ++ci) {
        const fs::path dir = fs::path(root) / ds.class_names[ci] / split;
        if (!fs::exists(dir)) continue;
        std::vector<std::string> files;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_regular_file()) files.push_back(e.path().string());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            PointCloudSample s;
            switch (format) {
                case PointFormat::off_mesh: s = sample_off_mesh(f, opt); break;
                case PointFormat::xyz_points: s = load_xyz(f, opt); break;
                case PointFormat::binary_blob: {
                    s = load_blob(f);
                    if (s.label != static_cast<int>(ci))
                        throw SchemaError(f + ": embedded label " + std::to_string(s.label) +
                                          " contradicts class directory '" + ds.class_names[ci] +
                                          "' (index " + std::to_string(ci) + ")");
                    break;
                }
            }
            s.label = static_cast<int>(ci);
            ds.samples.push_back(std::move(s));
        }
    }
    if (ds.samples.empty()) throw SchemaError(root + ": split '" + split + "' contains no samples");
    return ds;
}

// Synthetic desk-scale dataset: n_per_class samples per shape, unit-sphere
// normalized, split 80/20 into train/test by sample index.
inline std::pair<Dataset, Dataset> synth_dataset(const std::vector<PrimitiveShape>& shapes,
                                                 std::size_t n_per_class, std::size_t n_points,
                                                 std::uint64_t seed) {
    Dataset train, test;
    for (auto sh : shapes) {
        train.class_names.push_back(primitive_name(sh));
        test.class_names.push_back(primitive_name(sh));
    }
    // class index must follow sorted name order, matching the on-disk layout
    std::vector<std::size_t> order(shapes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return train.class_names[a] < train.class_names[b];
    });
    std::sort(train.class_names.begin(), train.class_names.end());
    std::sort(test.class_names.begin(), test.class_names.end());
    const std::size_t n_train = n_per_class - n_per_class / 5;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        const PrimitiveShape sh = shapes[order[rank]];
        for (std::size_t i = 0; i < n_per_class; ++i) {
            auto s = normalize_unit_sphere(
                synthesize(sh, n_points, splitmix64(seed ^ (rank * 1000003ULL + i))));
            s.label = static_cast<int>(rank);
            (i < n_train ? train : test).samples.push_back(std::move(s));
        }
    }
    return {std::move(train), std::move(test)};
}

}  // namespace pointcaps
