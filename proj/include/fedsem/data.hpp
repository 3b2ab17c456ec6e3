#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <vector>

#include "fedsem/tensor.hpp"

namespace fedsem {

/// Images of one shape with values in [0,1], optionally labeled by class.
struct Corpus {
  std::vector<Tensor> images;
  std::vector<int> labels;  // empty when unlabeled

  bool labeled() const { return !labels.empty(); }
  std::size_t size() const { return images.size(); }
  const Shape& image_shape() const { return images.front().shape(); }

  /// Throws FormatError (offset 0) if shapes differ or any pixel is outside [0,1].
  void validate() const;

  /// Subset in the given index order.
  Corpus select(const std::vector<std::size_t>& indices) const;
};

/// Exhaustive, disjoint assignment of corpus indices to clients.
struct Partition {
  std::vector<std::vector<std::size_t>> clients;
  double alpha = 0.0;

  std::size_t client_count() const { return clients.size(); }
  std::vector<std::size_t> sizes() const;
};

/// Per-class Dirichlet(alpha) split with largest-remainder rounding. Draws
/// that leave a client empty are redrawn up to `max_attempts` times.
Partition dirichlet_partition(const Corpus& corpus, std::size_t clients, double alpha, std::mt19937_64& rng,
                              int max_attempts = 1000);

/// Largest-remainder apportionment of `total` items by `proportions`.
/// Ties in the fractional part go to the lower index.
std::vector<std::size_t> largest_remainder(const std::vector<double>& proportions, std::size_t total);

/// Deterministic class-structured images: each class has a smooth base
/// pattern, each image adds a brightness shift and pixel noise.
Corpus synth_corpus(int classes, int per_class, Index channels, Index height, Index width, std::uint64_t seed);

/// FNV-1a over labels and the raw bytes of every pixel.
std::uint64_t corpus_hash(const Corpus& corpus);

/// Splits off a validation subset of size `validation` chosen by `rng`.
/// Returns {train, validation}.
std::pair<Corpus, Corpus> split_validation(const Corpus& corpus, std::size_t validation, std::mt19937_64& rng);

// Tensor binary format: "FSCT", u8 version (1), u8 rank, rank x u32 dims,
// then the payload as f64, all little-endian, row-major.
void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);
void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

/// Binary PPM (P6), maxval 255 only. Returns a (3, H, W) tensor in [0,1].
Tensor read_ppm(std::istream& is);
Tensor load_ppm(const std::filesystem::path& path);
void save_ppm(const std::filesystem::path& path, const Tensor& image);

/// Loads either a directory of class subdirectories holding .ppm files
/// (labels follow sorted subdirectory order) or a rank-4 (N, C, H, W) tensor
/// file with an optional `<name>.labels.fsct` sidecar.
Corpus load_corpus(const std::filesystem::path& path);
void save_corpus(const std::filesystem::path& path, const Corpus& corpus);

}  // namespace fedsem
