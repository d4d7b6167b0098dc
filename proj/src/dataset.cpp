#include "normgrad/dataset.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "normgrad/errors.hpp"

namespace normgrad {

namespace {

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ull;
    }
    return h;
}

// Deterministic Fisher-Yates shuffle of example indices.
std::vector<std::size_t> shuffled_indices(Rng& rng, std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = rng.uniform_int(i);
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

Dataset assemble_split(Rng& rng, std::vector<Vec>&& inputs, std::vector<int>&& labels,
                       int n_classes) {
    const std::size_t n = inputs.size();
    const std::vector<std::size_t> order = shuffled_indices(rng, n);
    Dataset ds;
    ds.inputs.reserve(n);
    ds.labels.reserve(n);
    for (std::size_t i : order) {
        ds.inputs.push_back(std::move(inputs[i]));
        ds.labels.push_back(labels[i]);
    }
    ds.n_train = n * 8 / 10;
    ds.n_val = n / 10;
    ds.n_test = n - ds.n_train - ds.n_val;
    ds.n_classes = n_classes;
    return ds;
}

}  // namespace

std::uint64_t Dataset::content_hash() const {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (const Vec& v : inputs) {
        h = fnv1a(h, v.data(), v.size() * sizeof(double));
    }
    h = fnv1a(h, labels.data(), labels.size() * sizeof(int));
    h = fnv1a(h, &n_train, sizeof(n_train));
    h = fnv1a(h, &n_val, sizeof(n_val));
    return h;
}

Dataset gen_blobs(Rng& rng, std::size_t classes, std::size_t per_class, std::size_t dim,
                  double spread) {
    if (classes < 1 || per_class < 1 || dim < 1) {
        throw std::invalid_argument("gen_blobs: counts must be >= 1");
    }
    // Class centers on the unit sphere.
    std::vector<Vec> centers(classes);
    for (Vec& c : centers) {
        do {
            c = rng.gaussian_vec(dim);
        } while (dot(c, c) == 0.0);
        const double inv_norm = 1.0 / std::sqrt(dot(c, c));
        for (double& v : c) v *= inv_norm;
    }

    std::vector<Vec> inputs;
    std::vector<int> labels;
    inputs.reserve(classes * per_class);
    labels.reserve(classes * per_class);
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t i = 0; i < per_class; ++i) {
            Vec x = centers[c];
            for (double& v : x) {
                v += spread * rng.gaussian();
            }
            inputs.push_back(std::move(x));
            labels.push_back(static_cast<int>(c));
        }
    }
    return assemble_split(rng, std::move(inputs), std::move(labels),
                          static_cast<int>(classes));
}

Dataset gen_spirals(Rng& rng, std::size_t classes, std::size_t per_class, double noise) {
    if (classes < 1 || per_class < 1) {
        throw std::invalid_argument("gen_spirals: counts must be >= 1");
    }
    std::vector<Vec> inputs;
    std::vector<int> labels;
    inputs.reserve(classes * per_class);
    labels.reserve(classes * per_class);
    for (std::size_t c = 0; c < classes; ++c) {
        const double arm = 2.0 * std::numbers::pi * static_cast<double>(c) /
                           static_cast<double>(classes);
        for (std::size_t i = 0; i < per_class; ++i) {
            const double t = (static_cast<double>(i) + 0.5) / static_cast<double>(per_class);
            const double r = t;
            const double theta = arm + 3.0 * std::numbers::pi * t;
            Vec x = {r * std::cos(theta) + noise * rng.gaussian(),
                     r * std::sin(theta) + noise * rng.gaussian()};
            inputs.push_back(std::move(x));
            labels.push_back(static_cast<int>(c));
        }
    }
    return assemble_split(rng, std::move(inputs), std::move(labels),
                          static_cast<int>(classes));
}

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be_u32(std::istream& is, const char* what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) {
        throw TruncatedFile(std::string("idx: truncated ") + what);
    }
    return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

}  // namespace

Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) {
        throw std::runtime_error("idx: cannot open " + images_path);
    }
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) {
        throw std::runtime_error("idx: cannot open " + labels_path);
    }

    if (read_be_u32(img, "image magic") != kImageMagic) {
        throw BadMagic("idx: bad image magic in " + images_path);
    }
    const std::uint32_t n_images = read_be_u32(img, "image count");
    const std::uint32_t rows = read_be_u32(img, "row count");
    const std::uint32_t cols = read_be_u32(img, "column count");

    if (read_be_u32(lab, "label magic") != kLabelMagic) {
        throw BadMagic("idx: bad label magic in " + labels_path);
    }
    const std::uint32_t n_labels = read_be_u32(lab, "label count");
    if (n_images != n_labels) {
        throw CountMismatch("idx: " + std::to_string(n_images) + " images vs " +
                            std::to_string(n_labels) + " labels");
    }

    const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
    Dataset ds;
    ds.inputs.reserve(n_images);
    ds.labels.reserve(n_images);
    std::vector<unsigned char> buf(pixels);
    for (std::uint32_t i = 0; i < n_images; ++i) {
        if (!img.read(reinterpret_cast<char*>(buf.data()),
                      static_cast<std::streamsize>(pixels))) {
            throw TruncatedFile("idx: truncated image data in " + images_path);
        }
        Vec x(pixels);
        for (std::size_t p = 0; p < pixels; ++p) {
            x[p] = static_cast<double>(buf[p]) / 255.0;
        }
        char label = 0;
        if (!lab.read(&label, 1)) {
            throw TruncatedFile("idx: truncated label data in " + labels_path);
        }
        ds.inputs.push_back(std::move(x));
        ds.labels.push_back(static_cast<int>(static_cast<unsigned char>(label)));
    }
    ds.n_train = n_images;
    ds.n_classes = 10;
    return ds;
}

}  // namespace normgrad
