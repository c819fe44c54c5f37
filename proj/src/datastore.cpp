#include "betkit/datastore.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace betkit {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "NPY I/O assumes a little-endian host");

// ---------------------------------------------------------------------------
// NPY

namespace {

constexpr char kMagic[] = "\x93NUMPY";

std::string header_value(const std::string& header, const std::string& key) {
    const auto k = header.find("'" + key + "'");
    if (k == std::string::npos) throw FormatError("NPY header lacks '" + key + "'");
    auto colon = header.find(':', k);
    if (colon == std::string::npos) throw FormatError("malformed NPY header");
    ++colon;
    while (colon < header.size() && header[colon] == ' ') ++colon;
    if (header[colon] == '(') {
        const auto close = header.find(')', colon);
        return header.substr(colon, close - colon + 1);
    }
    const auto end = header.find_first_of(",}", colon);
    return header.substr(colon, end - colon);
}

std::vector<std::size_t> parse_shape(const std::string& tuple) {
    std::vector<std::size_t> dims;
    std::string inner = tuple.substr(1, tuple.size() - 2);
    std::stringstream ss(inner);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto first = item.find_first_not_of(' ');
        if (first == std::string::npos) continue;
        dims.push_back(static_cast<std::size_t>(std::stoull(item.substr(first))));
    }
    return dims;
}

}  // namespace

Matrix read_npy(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingFileError("cannot open array file: " + path.string());
    char magic[6];
    in.read(magic, 6);
    if (!in || std::memcmp(magic, kMagic, 6) != 0) throw FormatError("not an NPY file: " + path.string());
    unsigned char version[2];
    in.read(reinterpret_cast<char*>(version), 2);
    std::uint32_t header_len = 0;
    if (version[0] == 1) {
        std::uint16_t len16 = 0;
        in.read(reinterpret_cast<char*>(&len16), 2);
        header_len = len16;
    } else if (version[0] == 2 || version[0] == 3) {
        in.read(reinterpret_cast<char*>(&header_len), 4);
    } else {
        throw FormatError("unsupported NPY version in " + path.string());
    }
    std::string header(header_len, '\0');
    in.read(header.data(), header_len);
    if (!in) throw FormatError("truncated NPY header: " + path.string());

    std::string descr = header_value(header, "descr");
    descr.erase(std::remove(descr.begin(), descr.end(), '\''), descr.end());
    const bool fortran = header_value(header, "fortran_order").find("True") != std::string::npos;
    const auto shape = parse_shape(header_value(header, "shape"));
    if (shape.empty() || shape.size() > 2) throw ShapeError("NPY array must be 1-D or 2-D: " + path.string());
    const std::size_t rows = shape[0];
    const std::size_t cols = shape.size() == 2 ? shape[1] : 1;
    const std::size_t count = rows * cols;

    std::vector<double> values(count);
    if (descr == "<f8") {
        in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * 8));
    } else if (descr == "<f4") {
        std::vector<float> narrow(count);
        in.read(reinterpret_cast<char*>(narrow.data()), static_cast<std::streamsize>(count * 4));
        std::copy(narrow.begin(), narrow.end(), values.begin());
    } else {
        throw FormatError("unsupported NPY dtype '" + descr + "' in " + path.string());
    }
    if (!in) throw FormatError("truncated NPY payload: " + path.string());

    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            m(i, j) = fortran ? values[j * rows + i] : values[i * cols + j];
        }
    }
    return m;
}

void write_npy(const fs::path& path, const Matrix& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MissingFileError("cannot write array file: " + path.string());
    std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': (" +
                         std::to_string(m.rows()) + ", " + std::to_string(m.cols()) + "), }";
    // Pad so magic + version + length + header is a multiple of 64 and ends in newline.
    const std::size_t preamble = 6 + 2 + 2;
    const std::size_t total = ((preamble + header.size() + 1 + 63) / 64) * 64;
    header.append(total - preamble - header.size() - 1, ' ');
    header.push_back('\n');
    out.write(kMagic, 6);
    const char version[2] = {1, 0};
    out.write(version, 2);
    const auto len = static_cast<std::uint16_t>(header.size());
    out.write(reinterpret_cast<const char*>(&len), 2);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char*>(m.data().data()),
              static_cast<std::streamsize>(m.data().size() * sizeof(double)));
    if (!out) throw DataError("failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// Normalization and projection

namespace {

constexpr double kUnitTolerance = 1e-12;

void require_finite(const Matrix& m, const std::string& what) {
    for (double v : m.data()) {
        if (!std::isfinite(v)) throw NonFiniteError(what + " contains non-finite values");
    }
}

}  // namespace

void normalize_rows(Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto r = m.row(i);
        const double norm = std::sqrt(dot(r, r));
        if (!(norm > 0.0)) throw FormatError("cannot normalize a zero vector");
        if (std::abs(norm - 1.0) <= kUnitTolerance) continue;
        for (double& v : r) v /= norm;
    }
}

void normalize_columns(Matrix& m) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < m.rows(); ++i) s += m(i, j) * m(i, j);
        const double norm = std::sqrt(s);
        if (!(norm > 0.0)) throw FormatError("cannot normalize a zero vector");
        if (std::abs(norm - 1.0) <= kUnitTolerance) continue;
        for (std::size_t i = 0; i < m.rows(); ++i) m(i, j) /= norm;
    }
}

std::optional<std::size_t> ConceptDictionary::index_of(const std::string& name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) return std::nullopt;
    return static_cast<std::size_t>(it - names.begin());
}

Matrix project_concepts(const EmbeddingDataset& e, const ConceptDictionary& c) {
    if (e.h.cols() != c.c.rows()) throw ShapeError("embedding and concept dimensions differ");
    const std::size_t n = e.h.rows(), d = e.h.cols(), m = c.c.cols();
    Matrix z(n, m);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) s += e.h(i, k) * c.c(k, j);
            z(i, j) = s;
        }
    }
    return z;
}

std::vector<double> classifier_scores(const Classifier& classifier, const Matrix& h) {
    std::vector<double> out(h.rows());
    for (std::size_t i = 0; i < h.rows(); ++i) out[i] = classify(classifier, h.row(i));
    return out;
}

// ---------------------------------------------------------------------------
// Manifest

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path candidate(p);
    return candidate.is_absolute() ? candidate : base / candidate;
}

template <typename T>
T field(const json& node, const char* key, const std::string& where) {
    if (!node.contains(key)) throw FormatError("manifest: missing " + where + "." + key);
    try {
        return node.at(key).get<T>();
    } catch (const json::exception& e) {
        throw FormatError("manifest: bad " + where + "." + key + ": " + e.what());
    }
}

ScoreMode parse_score_mode(const std::string& s) {
    if (s == "logit") return ScoreMode::logit;
    if (s == "softmax") return ScoreMode::softmax;
    throw FormatError("manifest: unknown score_mode '" + s + "'");
}

}  // namespace

Dataset load_dataset(const fs::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw MissingFileError("cannot open manifest: " + manifest_path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw FormatError(std::string("manifest is not valid JSON: ") + e.what());
    }
    const fs::path base = manifest_path.parent_path();
    if (field<int>(doc, "version", "manifest") != kManifestVersion) {
        throw FormatError("unsupported manifest version");
    }

    Dataset ds;
    if (!doc.contains("embeddings")) throw FormatError("manifest: missing embeddings");
    const json& emb = doc.at("embeddings");
    ds.embeddings.h = read_npy(resolve(base, field<std::string>(emb, "path", "embeddings")));
    require_finite(ds.embeddings.h, "embeddings");
    if (emb.contains("rows") && field<std::size_t>(emb, "rows", "embeddings") != ds.embeddings.h.rows()) {
        throw ShapeError("embeddings: row count disagrees with manifest");
    }
    if (emb.contains("dim") && field<std::size_t>(emb, "dim", "embeddings") != ds.embeddings.h.cols()) {
        throw ShapeError("embeddings: dimension disagrees with manifest");
    }
    if (emb.contains("ids")) {
        ds.embeddings.ids = field<std::vector<std::string>>(emb, "ids", "embeddings");
        if (ds.embeddings.ids.size() != ds.embeddings.h.rows()) {
            throw ShapeError("embeddings: id count disagrees with rows");
        }
    }
    if (ds.embeddings.h.rows() == 0 || ds.embeddings.h.cols() == 0) throw ShapeError("embeddings are empty");
    normalize_rows(ds.embeddings.h);

    if (!doc.contains("concepts")) throw FormatError("manifest: missing concepts");
    const json& con = doc.at("concepts");
    ds.concepts.c = read_npy(resolve(base, field<std::string>(con, "path", "concepts")));
    require_finite(ds.concepts.c, "concepts");
    ds.concepts.names = field<std::vector<std::string>>(con, "names", "concepts");
    if (ds.concepts.c.rows() != ds.embeddings.h.cols()) {
        throw ShapeError("concepts: dimension differs from embeddings");
    }
    if (con.contains("dim") && field<std::size_t>(con, "dim", "concepts") != ds.concepts.c.rows()) {
        throw ShapeError("concepts: dimension disagrees with manifest");
    }
    if (ds.concepts.names.size() != ds.concepts.c.cols()) {
        throw ShapeError("concepts: name count differs from columns");
    }
    {
        auto sorted = ds.concepts.names;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
            throw FormatError("concepts: names must be unique");
        }
    }
    normalize_columns(ds.concepts.c);

    if (!doc.contains("classifier")) throw FormatError("manifest: missing classifier");
    const json& cls = doc.at("classifier");
    ds.classifier.weights = read_npy(resolve(base, field<std::string>(cls, "path", "classifier")));
    require_finite(ds.classifier.weights, "classifier");
    ds.classifier.class_names = field<std::vector<std::string>>(cls, "classes", "classifier");
    if (ds.classifier.weights.cols() != ds.embeddings.h.cols()) {
        throw ShapeError("classifier: dimension differs from embeddings");
    }
    if (ds.classifier.class_names.size() != ds.classifier.weights.rows()) {
        throw ShapeError("classifier: class count differs from rows");
    }
    if (cls.contains("score_mode")) {
        ds.classifier.score_mode = parse_score_mode(field<std::string>(cls, "score_mode", "classifier"));
    }
    if (cls.contains("temperature")) {
        ds.classifier.temperature = field<double>(cls, "temperature", "classifier");
    }
    normalize_rows(ds.classifier.weights);
    ds.classifier.validate();
    return ds;
}

void save_dataset(const fs::path& manifest_path, const Dataset& ds) {
    const fs::path base = manifest_path.parent_path();
    if (!base.empty()) fs::create_directories(base);
    write_npy(base / "embeddings.npy", ds.embeddings.h);
    write_npy(base / "concepts.npy", ds.concepts.c);
    write_npy(base / "classifier.npy", ds.classifier.weights);

    json doc;
    doc["version"] = kManifestVersion;
    doc["embeddings"] = {{"path", "embeddings.npy"},
                         {"rows", ds.embeddings.h.rows()},
                         {"dim", ds.embeddings.h.cols()}};
    if (!ds.embeddings.ids.empty()) doc["embeddings"]["ids"] = ds.embeddings.ids;
    doc["concepts"] = {{"path", "concepts.npy"}, {"dim", ds.concepts.c.rows()}, {"names", ds.concepts.names}};
    doc["classifier"] = {{"path", "classifier.npy"},
                         {"classes", ds.classifier.class_names},
                         {"score_mode", ds.classifier.score_mode == ScoreMode::logit ? "logit" : "softmax"},
                         {"temperature", ds.classifier.temperature}};
    std::ofstream out(manifest_path);
    if (!out) throw MissingFileError("cannot write manifest: " + manifest_path.string());
    out << doc.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Streams

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(order[i - 1], order[pick(rng)]);
    }
    return order;
}

std::vector<PairObservation> stream_global(const Matrix& z, const std::vector<double>& scores,
                                           std::size_t j, std::uint64_t seed) {
    if (scores.size() != z.rows()) throw ShapeError("scores and concepts differ in length");
    if (j >= z.cols()) throw ConfigError("concept index out of range");
    std::vector<PairObservation> out;
    out.reserve(z.rows());
    for (std::size_t i : seeded_permutation(z.rows(), seed)) out.push_back({scores[i], z(i, j)});
    return out;
}

std::vector<TripletObservation> stream_global_conditional(const Matrix& z,
                                                          const std::vector<double>& scores,
                                                          std::size_t j, std::uint64_t seed) {
    if (scores.size() != z.rows()) throw ShapeError("scores and concepts differ in length");
    if (j >= z.cols()) throw ConfigError("concept index out of range");
    std::vector<TripletObservation> out;
    out.reserve(z.rows());
    for (std::size_t i : seeded_permutation(z.rows(), seed)) {
        TripletObservation t{scores[i], z(i, j), {}};
        t.zrest.reserve(z.cols() - 1);
        for (std::size_t k = 0; k < z.cols(); ++k) {
            if (k != j) t.zrest.push_back(z(i, k));
        }
        out.push_back(std::move(t));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Toy dataset

Dataset make_toy_dataset(std::size_t n, std::size_t d, std::size_t m, std::size_t important,
                         std::uint64_t seed) {
    if (n == 0 || d == 0 || m == 0) throw ConfigError("toy dataset needs positive sizes");
    if (important > m) throw ConfigError("more important concepts than concepts");
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Dataset ds;
    ds.concepts.c = Matrix(d, m);
    for (double& v : ds.concepts.c.data()) v = normal(rng);
    normalize_columns(ds.concepts.c);
    for (std::size_t j = 0; j < m; ++j) ds.concepts.names.push_back("concept_" + std::to_string(j));

    ds.embeddings.h = Matrix(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        auto row = ds.embeddings.h.row(i);
        for (std::size_t j = 0; j < m; ++j) {
            if (unit(rng) >= 0.3) continue;
            const double amount = 0.5 + 0.5 * unit(rng);
            for (std::size_t k = 0; k < d; ++k) row[k] += amount * ds.concepts.c(k, j);
        }
        for (double& v : row) v += 0.15 * normal(rng);
        ds.embeddings.ids.push_back("sample_" + std::to_string(i));
    }
    normalize_rows(ds.embeddings.h);

    // Class 0 aligns with the important concepts, class 1 with the next block, class 2 is noise.
    const std::size_t classes = 3;
    ds.classifier.weights = Matrix(classes, d);
    for (std::size_t k = 0; k < d; ++k) {
        for (std::size_t j = 0; j < important; ++j) ds.classifier.weights(0, k) += ds.concepts.c(k, j);
        for (std::size_t j = important; j < std::min(m, 2 * important); ++j) {
            ds.classifier.weights(1, k) += ds.concepts.c(k, j);
        }
        ds.classifier.weights(2, k) = normal(rng);
        if (important == 0) ds.classifier.weights(0, k) = normal(rng);
        if (important == 0 || important >= m) ds.classifier.weights(1, k) += normal(rng);
    }
    normalize_rows(ds.classifier.weights);
    ds.classifier.class_names = {"target", "other", "noise"};
    return ds;
}

}  // namespace betkit
