#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "normgrad/rng.hpp"
#include "normgrad/vec.hpp"

namespace normgrad {

// Labeled vectors stored as [train | val | test] with recorded split sizes.
struct Dataset {
    std::vector<Vec> inputs;
    std::vector<int> labels;
    std::size_t n_train = 0;
    std::size_t n_val = 0;
    std::size_t n_test = 0;
    int n_classes = 0;

    std::size_t size() const { return inputs.size(); }
    std::size_t dim() const { return inputs.empty() ? 0 : inputs.front().size(); }

    std::size_t train_begin() const { return 0; }
    std::size_t val_begin() const { return n_train; }
    std::size_t test_begin() const { return n_train + n_val; }

    // FNV-1a over the raw bytes of inputs and labels; identifies the exact
    // dataset instance in experiment provenance.
    std::uint64_t content_hash() const;
};

// Gaussian clusters around random unit-sphere centers, shuffled and split
// 80/10/10. Deterministic given the rng's seed.
Dataset gen_blobs(Rng& rng, std::size_t classes, std::size_t per_class, std::size_t dim,
                  double spread);

// Interleaved 2-D spiral arms with radial Gaussian noise, split 80/10/10.
Dataset gen_spirals(Rng& rng, std::size_t classes, std::size_t per_class, double noise);

// Parses an IDX image/label file pair (big-endian magic 0x00000803 images,
// 0x00000801 labels). Pixels are scaled to [0,1]; every example lands in the
// train split. Throws BadMagic / TruncatedFile / CountMismatch.
Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path);

}  // namespace normgrad
