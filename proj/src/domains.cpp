#include "pxcl/domains.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace pxcl {

namespace {

constexpr char kDatasetMagic[8] = {'P', 'X', 'C', 'L', 'D', 'S', '0', '1'};
constexpr std::size_t kSide = 28;
constexpr std::size_t kPixels = kSide * kSide;

void write_u32_le(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32_le(std::ifstream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("dataset: truncated payload (section header)");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void read_split(std::ifstream& in, DatasetSplit& split, SplitTag tag) {
    split.tag = tag;
    const std::uint32_t count = read_u32_le(in);
    split.images.resize(count);
    split.labels.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        in.read(reinterpret_cast<char*>(split.images[i].data()), kPixels);
        char label;
        in.read(&label, 1);
        if (!in) throw std::runtime_error("dataset: truncated payload (record " + std::to_string(i) + ")");
        if (label != 0 && label != 1)
            throw std::runtime_error("dataset: invalid label " +
                                     std::to_string(static_cast<int>(label)) + " in record " +
                                     std::to_string(i));
        split.labels[i] = static_cast<std::uint8_t>(label);
    }
}

}  // namespace

Dataset load_canonical(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("dataset: cannot open " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kDatasetMagic, 8) != 0)
        throw std::runtime_error("dataset: bad magic in " + path.string());

    Dataset ds;
    read_split(in, ds.train, SplitTag::Train);
    read_split(in, ds.val, SplitTag::Val);
    read_split(in, ds.test, SplitTag::Test);

    in.peek();
    if (!in.eof())
        throw std::runtime_error("dataset: count mismatch, trailing bytes after declared sections in " +
                                 path.string());
    return ds;
}

void write_canonical(const Dataset& dataset, const std::filesystem::path& path) {
    for (const DatasetSplit* split : {&dataset.train, &dataset.val, &dataset.test}) {
        if (split->images.empty()) throw std::invalid_argument("dataset: refusing to write an empty split");
        if (split->images.size() != split->labels.size())
            throw std::invalid_argument("dataset: image/label count mismatch");
        for (std::uint8_t label : split->labels)
            if (label > 1) throw std::invalid_argument("dataset: label out of {0,1}");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("dataset: cannot open " + path.string() + " for writing");
    out.write(kDatasetMagic, 8);
    for (const DatasetSplit* split : {&dataset.train, &dataset.val, &dataset.test}) {
        write_u32_le(out, static_cast<std::uint32_t>(split->images.size()));
        for (std::size_t i = 0; i < split->images.size(); ++i) {
            out.write(reinterpret_cast<const char*>(split->images[i].data()), kPixels);
            const char label = static_cast<char>(split->labels[i]);
            out.write(&label, 1);
        }
    }
    if (!out) throw std::runtime_error("dataset: write failed for " + path.string());
}

namespace {

// Bilinear upsample of a coarse grid to 28x28, sampled at cell centers.
void add_lowfreq_field(const double* coarse, std::size_t grid, double* px) {
    const double scale = static_cast<double>(grid - 1) / (kSide - 1);
    for (std::size_t y = 0; y < kSide; ++y) {
        const double gy = y * scale;
        const std::size_t y0 = std::min(static_cast<std::size_t>(gy), grid - 2);
        const double fy = gy - static_cast<double>(y0);
        for (std::size_t x = 0; x < kSide; ++x) {
            const double gx = x * scale;
            const std::size_t x0 = std::min(static_cast<std::size_t>(gx), grid - 2);
            const double fx = gx - static_cast<double>(x0);
            const double v00 = coarse[y0 * grid + x0], v01 = coarse[y0 * grid + x0 + 1];
            const double v10 = coarse[(y0 + 1) * grid + x0], v11 = coarse[(y0 + 1) * grid + x0 + 1];
            px[y * kSide + x] +=
                (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
        }
    }
}

DatasetSplit synthesize_split(const SyntheticConfig& config, std::size_t count, SplitTag tag,
                              std::uint64_t split_tag_value) {
    constexpr std::size_t kGrid = 7;
    constexpr double kFieldStd = 0.05;
    constexpr double kBaseLo = 0.40, kBaseHi = 0.48;
    constexpr double kBlobSigma = 3.2;

    DatasetSplit split;
    split.tag = tag;
    split.images.resize(count);
    split.labels.resize(count);

    Rng rng(Rng::mix(config.seed, split_tag_value));
    std::size_t class1_running = 0;
    for (std::size_t i = 0; i < count; ++i) {
        // Spread class 1 evenly through the split: count stays within one
        // sample of count * class1_fraction.
        const std::size_t target =
            static_cast<std::size_t>(std::floor(static_cast<double>(i + 1) * config.class1_fraction));
        const int label = target > class1_running ? 1 : 0;
        class1_running += static_cast<std::size_t>(label);

        double px[kPixels];
        const double base = rng.uniform(kBaseLo, kBaseHi);
        for (auto& v : px) v = base;

        double coarse[kGrid * kGrid];
        for (auto& v : coarse) v = kFieldStd * rng.normal();
        add_lowfreq_field(coarse, kGrid, px);

        if (label == 1) {
            const double cx = rng.uniform(9.0, 19.0);
            const double cy = rng.uniform(9.0, 19.0);
            for (std::size_t y = 0; y < kSide; ++y)
                for (std::size_t x = 0; x < kSide; ++x) {
                    const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                    px[y * kSide + x] +=
                        config.blob_intensity * std::exp(-d2 / (2.0 * kBlobSigma * kBlobSigma));
                }
        }

        for (auto& v : px) v += config.noise_std * rng.normal();

        for (std::size_t p = 0; p < kPixels; ++p) {
            const double clamped = std::clamp(px[p], 0.0, 1.0);
            split.images[i][p] = static_cast<std::uint8_t>(std::lround(clamped * 255.0));
        }
        split.labels[i] = static_cast<std::uint8_t>(label);
    }
    return split;
}

}  // namespace

Dataset generate_synthetic(const SyntheticConfig& config) {
    if (config.n_train == 0 || config.n_val == 0 || config.n_test == 0)
        throw std::invalid_argument("synthetic: split counts must be positive");
    if (config.class1_fraction <= 0.0 || config.class1_fraction >= 1.0)
        throw std::invalid_argument("synthetic: class1_fraction must be in (0,1)");
    Dataset ds;
    ds.train = synthesize_split(config, config.n_train, SplitTag::Train, 1);
    ds.val = synthesize_split(config, config.n_val, SplitTag::Val, 2);
    ds.test = synthesize_split(config, config.n_test, SplitTag::Test, 3);
    return ds;
}

const char* domain_kind_name(DomainKind kind) {
    switch (kind) {
        case DomainKind::Base: return "Base";
        case DomainKind::LowDose: return "LowDose";
        case DomainKind::Portable: return "Portable";
        case DomainKind::Anatomical: return "Anatomical";
        case DomainKind::Institutional: return "Institutional";
    }
    throw std::invalid_argument("domain_kind_name: unknown kind");
}

DomainKind parse_domain_kind(const std::string& name) {
    for (DomainKind kind : {DomainKind::Base, DomainKind::LowDose, DomainKind::Portable,
                            DomainKind::Anatomical, DomainKind::Institutional})
        if (name == domain_kind_name(kind)) return kind;
    throw std::invalid_argument("unknown domain name '" + name +
                                "' (expected Base, LowDose, Portable, Anatomical or Institutional)");
}

int domain_kind_rank(DomainKind kind) {
    return static_cast<int>(kind);
}

namespace {

void lowdose(std::vector<double>& px, const DomainParams& p, Rng& rng) {
    for (double& v : px) v = 0.5 + p.lowdose_contrast * (v - 0.5);
    for (double& v : px) v += p.lowdose_noise_std * rng.normal();
}

void portable_blur(std::vector<double>& px, const DomainParams& p) {
    // 3x3 Gaussian taps, normalized to unit mass.
    const double s2 = 2.0 * p.portable_blur_sigma * p.portable_blur_sigma;
    double kernel[3][3];
    double mass = 0.0;
    for (int ky = -1; ky <= 1; ++ky)
        for (int kx = -1; kx <= 1; ++kx) {
            kernel[ky + 1][kx + 1] = std::exp(-(kx * kx + ky * ky) / s2);
            mass += kernel[ky + 1][kx + 1];
        }
    for (auto& row : kernel)
        for (double& v : row) v /= mass;

    std::vector<double> out(kPixels, 0.0);
    for (int y = 0; y < static_cast<int>(kSide); ++y)
        for (int x = 0; x < static_cast<int>(kSide); ++x) {
            double acc = 0.0;
            for (int ky = -1; ky <= 1; ++ky)
                for (int kx = -1; kx <= 1; ++kx) {
                    // Borders reflect about the edge pixel.
                    int sy = std::clamp(y + ky, 0, static_cast<int>(kSide) - 1);
                    int sx = std::clamp(x + kx, 0, static_cast<int>(kSide) - 1);
                    acc += kernel[ky + 1][kx + 1] * px[sy * kSide + sx];
                }
            out[y * kSide + x] = acc;
        }
    px = std::move(out);
}

void anatomical(std::vector<double>& px, const DomainParams& p, Rng& rng) {
    const double scale = rng.uniform(p.anatomical_scale_min, p.anatomical_scale_max);
    const int dx = static_cast<int>(rng.range(-p.anatomical_max_shift, p.anatomical_max_shift));
    const int dy = static_cast<int>(rng.range(-p.anatomical_max_shift, p.anatomical_max_shift));

    const double center = (kSide - 1) / 2.0;
    std::vector<double> out(kPixels, 0.0);
    for (int y = 0; y < static_cast<int>(kSide); ++y)
        for (int x = 0; x < static_cast<int>(kSide); ++x) {
            // Invert dest = center + scale*(src - center) + shift.
            const double sx = center + (x - dx - center) / scale;
            const double sy = center + (y - dy - center) / scale;
            const int x0 = static_cast<int>(std::floor(sx));
            const int y0 = static_cast<int>(std::floor(sy));
            const double fx = sx - x0, fy = sy - y0;
            double acc = 0.0;
            for (int oy = 0; oy <= 1; ++oy)
                for (int ox = 0; ox <= 1; ++ox) {
                    const int ix = x0 + ox, iy = y0 + oy;
                    if (ix < 0 || iy < 0 || ix >= static_cast<int>(kSide) || iy >= static_cast<int>(kSide))
                        continue;  // zero fill
                    const double w = (ox ? fx : 1.0 - fx) * (oy ? fy : 1.0 - fy);
                    acc += w * px[iy * kSide + ix];
                }
            out[y * kSide + x] = acc;
        }
    px = std::move(out);
}

void institutional(std::vector<double>& px, const DomainParams& p, Rng& rng) {
    const double gamma = rng.uniform(p.institutional_gamma_min, p.institutional_gamma_max);
    const double brightness = rng.uniform(p.institutional_brightness_min, p.institutional_brightness_max);
    for (double& v : px) v = std::pow(v, gamma) + brightness;
}

}  // namespace

std::vector<double> apply_domain(const std::vector<double>& image, const DomainSpec& spec,
                                 std::int64_t sample_index) {
    if (image.size() != kPixels)
        throw std::invalid_argument("apply_domain: image must hold 784 pixels, got " +
                                    std::to_string(image.size()));
    for (double v : image)
        if (!(v >= 0.0 && v <= 1.0))
            throw std::invalid_argument("apply_domain: input pixel " + std::to_string(v) +
                                        " outside [0,1]");

    std::vector<double> px = image;
    Rng rng(Rng::mix(spec.seed, static_cast<std::uint64_t>(sample_index)));
    switch (spec.kind) {
        case DomainKind::Base: return px;
        case DomainKind::LowDose: lowdose(px, spec.params, rng); break;
        case DomainKind::Portable: portable_blur(px, spec.params); break;
        case DomainKind::Anatomical: anatomical(px, spec.params, rng); break;
        case DomainKind::Institutional: institutional(px, spec.params, rng); break;
    }
    for (double& v : px) v = std::clamp(v, 0.0, 1.0);
    return px;
}

std::vector<Sample> make_domain_stream(const DatasetSplit& split, const DomainSpec& spec) {
    std::vector<Sample> stream;
    stream.reserve(split.size());
    std::vector<double> scaled(kPixels);
    for (std::size_t i = 0; i < split.size(); ++i) {
        for (std::size_t p = 0; p < kPixels; ++p) scaled[p] = split.images[i][p] / 255.0;
        Sample sample;
        sample.image = apply_domain(scaled, spec, static_cast<std::int64_t>(i));
        sample.label = split.labels[i];
        sample.domain_id = spec.domain_id;
        sample.source_index = static_cast<std::int64_t>(i);
        stream.push_back(std::move(sample));
    }
    return stream;
}

}  // namespace pxcl
