#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "betkit/classifier.hpp"
#include "betkit/common.hpp"
#include "betkit/payoffs.hpp"

namespace betkit {

/// Base class for every problem with on-disk data.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class MissingFileError : public DataError {
public:
    using DataError::DataError;
};
class ShapeError : public DataError {
public:
    using DataError::DataError;
};
class NonFiniteError : public DataError {
public:
    using DataError::DataError;
};
class FormatError : public DataError {
public:
    using DataError::DataError;
};

/// Reads a 1-D or 2-D NPY array of little-endian float64 or float32 (widened).
/// 1-D arrays load as a single column.
Matrix read_npy(const std::filesystem::path& path);

/// Writes NPY format 1.0, little-endian float64, C order.
void write_npy(const std::filesystem::path& path, const Matrix& m);

struct EmbeddingDataset {
    Matrix h;  ///< n x d, unit rows
    std::vector<std::string> ids;
};

struct ConceptDictionary {
    Matrix c;  ///< d x m, unit columns
    std::vector<std::string> names;

    std::size_t concepts() const noexcept { return c.cols(); }
    std::optional<std::size_t> index_of(const std::string& name) const;
};

struct Dataset {
    EmbeddingDataset embeddings;
    ConceptDictionary concepts;
    Classifier classifier;
};

inline constexpr int kManifestVersion = 1;

/// Loads and normalizes every array referenced by a JSON manifest. Relative array paths
/// resolve against the manifest's directory.
Dataset load_dataset(const std::filesystem::path& manifest_path);

/// Writes embeddings.npy, concepts.npy, classifier.npy next to the manifest.
void save_dataset(const std::filesystem::path& manifest_path, const Dataset& dataset);

/// Rescales rows (or columns) to unit norm; vectors already within 1e-12 of unit norm
/// are left untouched so load/save/load is a bit-exact fixpoint.
void normalize_rows(Matrix& m);
void normalize_columns(Matrix& m);

/// Z = H c, cosine similarities in [-1, 1].
Matrix project_concepts(const EmbeddingDataset& embeddings, const ConceptDictionary& concepts);

/// One classifier score per dataset row.
std::vector<double> classifier_scores(const Classifier& classifier, const Matrix& h);

/// Seeded uniform permutation of 0..n-1.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

/// (score, z_j) pairs in permuted row order; one pass without replacement.
std::vector<PairObservation> stream_global(const Matrix& z, const std::vector<double>& scores,
                                           std::size_t j, std::uint64_t seed);

/// (score, z_j, z_-j) triplets in permuted row order.
std::vector<TripletObservation> stream_global_conditional(const Matrix& z,
                                                          const std::vector<double>& scores,
                                                          std::size_t j, std::uint64_t seed);

/// Small synthetic dataset: concepts 0..important-1 drive the first class.
Dataset make_toy_dataset(std::size_t n, std::size_t d, std::size_t m, std::size_t important,
                         std::uint64_t seed);

}  // namespace betkit
