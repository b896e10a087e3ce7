#pragma once

#include <Eigen/QR>
#include <zlib.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ssnal/errors.hpp"
#include "ssnal/operators.hpp"

namespace ssnal {

/// Regression data: m samples of n features (CSC) with targets b.
struct Dataset {
    SparseMatrix features;
    Vector targets;
    std::string source;
    std::vector<std::string> transforms; // replayable, in application order

    Index samples() const { return features.rows(); }
    Index feature_count() const { return features.cols(); }

    bool operator==(const Dataset& other) const
    {
        if (samples() != other.samples() || feature_count() != other.feature_count()) return false;
        if (targets != other.targets) return false;
        if (features.nonZeros() != other.features.nonZeros()) return false;
        return SparseMatrix(features - other.features).squaredNorm() == 0.0 && transforms == other.transforms;
    }
};

/// Dense backend when at least `dense_fraction` of the entries are stored, CSC otherwise.
inline LinearOperator make_operator(const Dataset& ds, double dense_fraction = 0.5)
{
    const double size = static_cast<double>(ds.samples()) * static_cast<double>(ds.feature_count());
    if (size > 0 && static_cast<double>(ds.features.nonZeros()) >= dense_fraction * size) {
        return LinearOperator::dense(Matrix(ds.features));
    }
    return LinearOperator::sparse(ds.features);
}

// ---------------------------------------------------------------------------
// LIBSVM text format
// ---------------------------------------------------------------------------

namespace detail {

inline bool is_space(char ch) { return ch == ' ' || ch == '\t' || ch == '\r' || ch == '\v' || ch == '\f'; }

template <class T>
T parse_number(std::string_view tok, std::size_t line, const char* what)
{
    T value{};
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
        throw parse_error(std::string("non-numeric ") + what + " '" + std::string(tok) + "'", line);
    }
    return value;
}

/// Incremental LIBSVM reader: feed lines, then build().
class LibsvmBuilder {
public:
    void add_line(std::string_view text)
    {
        ++line_;
        std::size_t pos = 0;
        auto next_token = [&]() -> std::string_view {
            while (pos < text.size() && is_space(text[pos])) ++pos;
            const std::size_t start = pos;
            while (pos < text.size() && !is_space(text[pos])) ++pos;
            return text.substr(start, pos - start);
        };
        std::string_view tok = next_token();
        if (tok.empty()) return; // blank line
        const double target = parse_number<double>(tok, line_, "target");
        if (!std::isfinite(target)) throw parse_error("non-finite target", line_);
        const Index row = static_cast<Index>(targets_.size());
        targets_.push_back(target);
        long long prev = 0;
        for (tok = next_token(); !tok.empty(); tok = next_token()) {
            const auto colon = tok.find(':');
            if (colon == std::string_view::npos || colon == 0 || colon + 1 == tok.size()) {
                throw parse_error("malformed feature '" + std::string(tok) + "', expected idx:val", line_);
            }
            const auto idx = parse_number<long long>(tok.substr(0, colon), line_, "index");
            const auto val = parse_number<double>(tok.substr(colon + 1), line_, "value");
            if (idx < 1) throw parse_error("feature indices are 1-based", line_);
            if (idx <= prev) throw parse_error("feature indices must be strictly ascending", line_);
            if (!std::isfinite(val)) throw parse_error("non-finite feature value", line_);
            prev = idx;
            max_index_ = std::max<Index>(max_index_, static_cast<Index>(idx));
            if (val != 0.0) triplets_.emplace_back(static_cast<int>(row), static_cast<int>(idx - 1), val);
        }
    }

    Dataset build(std::string source, std::optional<Index> n_features)
    {
        Dataset ds;
        const Index n = n_features ? *n_features : max_index_;
        if (n < max_index_) {
            throw parse_error("feature index " + std::to_string(max_index_) + " exceeds requested n = "
                                  + std::to_string(n), 0);
        }
        ds.features.resize(static_cast<Index>(targets_.size()), n);
        ds.features.setFromTriplets(triplets_.begin(), triplets_.end());
        ds.features.makeCompressed();
        ds.targets = Eigen::Map<const Vector>(targets_.data(), static_cast<Index>(targets_.size()));
        ds.source = std::move(source);
        return ds;
    }

private:
    std::vector<double> targets_;
    std::vector<Eigen::Triplet<double>> triplets_;
    Index max_index_ = 0;
    std::size_t line_ = 0;
};

} // namespace detail

/**
 * Parses `<target> <idx>:<val> ...` lines with 1-based, strictly ascending
 * indices. Blank lines are skipped and any run of spaces or tabs separates
 * tokens. n is the largest index seen unless `n_features` overrides it.
 */
inline Dataset parse_libsvm(std::istream& in, std::string source = "<stream>",
                            std::optional<Index> n_features = std::nullopt)
{
    detail::LibsvmBuilder builder;
    std::string line;
    while (std::getline(in, line)) builder.add_line(line);
    return builder.build(std::move(source), n_features);
}

inline Dataset parse_libsvm_string(std::string_view text, std::optional<Index> n_features = std::nullopt)
{
    detail::LibsvmBuilder builder;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        builder.add_line(text.substr(start, end - start));
        start = end + 1;
    }
    return builder.build("<string>", n_features);
}

/// Reads a LIBSVM file; gzip-compressed input is detected and inflated transparently.
inline Dataset read_libsvm(const std::string& path, std::optional<Index> n_features = std::nullopt)
{
    gzFile file = gzopen(path.c_str(), "rb");
    if (!file) throw std::runtime_error("cannot open '" + path + "'");
    detail::LibsvmBuilder builder;
    std::vector<char> buf(1 << 20);
    std::string pending;
    try {
        for (;;) {
            const int got = gzread(file, buf.data(), static_cast<unsigned>(buf.size()));
            if (got < 0) {
                int err = 0;
                throw std::runtime_error("read error in '" + path + "': " + gzerror(file, &err));
            }
            if (got == 0) break;
            std::size_t start = 0;
            const std::string_view chunk(buf.data(), static_cast<std::size_t>(got));
            for (;;) {
                const std::size_t nl = chunk.find('\n', start);
                if (nl == std::string_view::npos) {
                    pending.append(chunk.substr(start));
                    break;
                }
                if (pending.empty()) {
                    builder.add_line(chunk.substr(start, nl - start));
                } else {
                    pending.append(chunk.substr(start, nl - start));
                    builder.add_line(pending);
                    pending.clear();
                }
                start = nl + 1;
            }
        }
        if (!pending.empty()) builder.add_line(pending);
    } catch (...) {
        gzclose(file);
        throw;
    }
    gzclose(file);
    return builder.build(path, n_features);
}

namespace detail {

inline void append_shortest(std::string& out, double v)
{
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, ptr);
}

} // namespace detail

/// Writes the dataset in LIBSVM format using shortest round-trip number formatting.
inline void write_libsvm(const Dataset& ds, std::ostream& out)
{
    using RowMajor = Eigen::SparseMatrix<double, Eigen::RowMajor>;
    const RowMajor rows(ds.features);
    std::string line;
    for (Index i = 0; i < ds.samples(); ++i) {
        line.clear();
        detail::append_shortest(line, ds.targets[i]);
        for (RowMajor::InnerIterator it(rows, i); it; ++it) {
            line.push_back(' ');
            line.append(std::to_string(it.col() + 1));
            line.push_back(':');
            detail::append_shortest(line, it.value());
        }
        line.push_back('\n');
        out << line;
    }
}

inline std::string to_libsvm_string(const Dataset& ds)
{
    std::ostringstream os;
    write_libsvm(ds, os);
    return os.str();
}

// ---------------------------------------------------------------------------
// Polynomial basis expansion
// ---------------------------------------------------------------------------

/// Number of monomials of total degree 1..order in d variables (plus one with the constant term).
inline std::uint64_t polynomial_feature_count(std::uint64_t d, int order, bool include_constant = false)
{
    // C(d + order, order), computed incrementally; each partial product is an exact binomial.
    long double count = 1.0L;
    std::uint64_t exact = 1;
    bool overflow = false;
    for (int k = 1; k <= order; ++k) {
        count = count * static_cast<long double>(d + k) / k;
        const std::uint64_t num = d + static_cast<std::uint64_t>(k);
        if (!overflow && exact > std::numeric_limits<std::uint64_t>::max() / num) overflow = true;
        if (!overflow) exact = exact * num / static_cast<std::uint64_t>(k);
    }
    if (overflow || count > 1.8e19L) return std::numeric_limits<std::uint64_t>::max();
    return include_constant ? exact : exact - 1;
}

struct ExpandOptions {
    bool include_constant = false;
    std::uint64_t max_features = 50'000'000;
    std::uint64_t max_nonzeros = 400'000'000;
};

/**
 * Appends every monomial of total degree 1..order over the original features.
 *
 * Columns are in graded lexicographic order: all degree-1 terms, then the
 * degree-2 terms u_i u_j with i <= j in lexicographic order of (i, j), and so
 * on. With include_constant a column of ones is placed first.
 */
inline Dataset polynomial_expand(const Dataset& ds, int order, const ExpandOptions& opt = {})
{
    if (order < 2) throw std::invalid_argument("polynomial_expand: order must be >= 2");
    const Index m = ds.samples();
    const Index d = ds.feature_count();
    const std::uint64_t projected = polynomial_feature_count(static_cast<std::uint64_t>(d), order, opt.include_constant);
    if (projected > opt.max_features) {
        throw std::length_error("polynomial_expand: " + std::to_string(projected) + " features exceed the cap of "
                                + std::to_string(opt.max_features));
    }
    const Matrix x(ds.features);

    std::vector<SparseMatrix::StorageIndex> outer;
    std::vector<SparseMatrix::StorageIndex> inner;
    std::vector<double> values;
    outer.reserve(projected + 1);
    outer.push_back(0);
    auto emit = [&](const Vector& col) {
        for (Index i = 0; i < m; ++i) {
            if (col[i] != 0.0) {
                inner.push_back(static_cast<SparseMatrix::StorageIndex>(i));
                values.push_back(col[i]);
            }
        }
        if (values.size() > opt.max_nonzeros) throw std::length_error("polynomial_expand: nonzero cap exceeded");
        outer.push_back(static_cast<SparseMatrix::StorageIndex>(values.size()));
    };

    if (opt.include_constant) emit(Vector::Ones(m));
    std::vector<Vector> prefix(static_cast<std::size_t>(order) + 1, Vector(m));
    prefix[0] = Vector::Ones(m);
    // prefix[depth] holds the product of the first `depth` chosen variables.
    auto generate = [&](auto&& self, int depth, int degree, Index start) -> void {
        for (Index j = start; j < d; ++j) {
            prefix[depth + 1] = prefix[depth].cwiseProduct(x.col(j));
            if (depth + 1 == degree) {
                emit(prefix[depth + 1]);
            } else {
                self(self, depth + 1, degree, j);
            }
        }
    };
    for (int degree = 1; degree <= order; ++degree) generate(generate, 0, degree, 0);

    Dataset out;
    const Index ncols = static_cast<Index>(outer.size()) - 1;
    out.features = Eigen::Map<const SparseMatrix>(m, ncols, static_cast<Index>(values.size()), outer.data(),
                                                  inner.data(), values.data());
    out.targets = ds.targets;
    out.source = ds.source;
    out.transforms = ds.transforms;
    out.transforms.push_back("expand:order=" + std::to_string(order) + (opt.include_constant ? ",constant" : ""));
    return out;
}

// ---------------------------------------------------------------------------
// Column normalization
// ---------------------------------------------------------------------------

struct NormalizedDataset {
    Dataset data;
    Vector weights; // lambda_j * s_j
    Vector scales;  // s_j = 1 / max(1, ||col_j||)

    /// Maps a solution of the normalized problem back: x_j = s_j * xhat_j.
    Vector to_original(const Vector& xhat) const { return scales.cwiseProduct(xhat); }
};

inline Vector column_scales(const SparseMatrix& a)
{
    Vector s(a.cols());
    for (Index j = 0; j < a.cols(); ++j) s[j] = 1.0 / std::max(1.0, a.col(j).norm());
    return s;
}

/**
 * Scales every column to norm at most one and turns the scalar lambda
 * into the weight vector of the rescaled variables. Columns with norm <= 1
 * (zero columns included) are untouched.
 */
inline NormalizedDataset normalize_columns(const Dataset& ds, double lambda)
{
    if (!(lambda > 0.0)) throw std::invalid_argument("normalize_columns: lambda must be positive");
    NormalizedDataset out;
    out.scales = column_scales(ds.features);
    out.data = ds;
    out.data.features = ds.features * out.scales.asDiagonal();
    out.data.features.makeCompressed();
    out.data.transforms.push_back("normalize");
    out.weights = lambda * out.scales;
    return out;
}

// ---------------------------------------------------------------------------
// Noise
// ---------------------------------------------------------------------------

/// b + e with e ~ N(0, sigma^2 I) and sigma^2 = (||b||^2 / m) 10^(-snr_db / 10).
inline Vector add_awgn(const Vector& b, double snr_db, std::uint64_t seed)
{
    const double power = b.squaredNorm() / static_cast<double>(b.size());
    if (!(power > 0.0)) throw std::invalid_argument("add_awgn: signal is zero, SNR is undefined");
    const double sd = std::sqrt(power * std::pow(10.0, -snr_db / 10.0));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, sd);
    Vector out = b;
    for (Index i = 0; i < out.size(); ++i) out[i] += normal(rng);
    return out;
}

inline Vector add_noise_60db(const Vector& b, std::uint64_t seed) { return add_awgn(b, 60.0, seed); }

// ---------------------------------------------------------------------------
// Synthetic instances
// ---------------------------------------------------------------------------

enum class SynthProfile { gaussian, geometric };

struct SynthSpec {
    Index m = 100;
    Index n = 500;
    Index k = 10;
    SynthProfile profile = SynthProfile::gaussian;
    double condition = 1e3;  // largest / smallest singular value (geometric profile)
    double scale = 1.0;      // largest singular value (geometric profile)
    bool noise = true;       // 60 dB additive noise
    std::uint64_t seed = 1;
};

struct SyntheticInstance {
    Dataset data;
    Vector x_true;
};

/**
 * A (m x n) is either i.i.d. N(0, 1/m) or U diag(s) V^T with random
 * orthonormal U, V and singular values decaying geometrically from `scale`
 * to `scale / condition`. x_true has k nonzero N(0,1) entries on a random
 * support and b = A x_true (+ 60 dB noise). With k = 0 the noise is drawn
 * against unit signal power, so b is pure N(0, 1e-6) noise.
 */
inline SyntheticInstance synth_instance(const SynthSpec& spec)
{
    if (spec.m <= 0 || spec.n <= 0) throw std::invalid_argument("synth_instance: m and n must be positive");
    if (spec.k < 0 || spec.k > spec.n) throw std::invalid_argument("synth_instance: need 0 <= k <= n");
    if (!(spec.condition >= 1.0) || !(spec.scale > 0.0)) throw std::invalid_argument("synth_instance: bad spectrum");
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto gaussian = [&](Index r, Index c) {
        Matrix g(r, c);
        for (Index j = 0; j < c; ++j)
            for (Index i = 0; i < r; ++i) g(i, j) = normal(rng);
        return g;
    };

    Matrix a;
    if (spec.profile == SynthProfile::gaussian) {
        a = gaussian(spec.m, spec.n) / std::sqrt(static_cast<double>(spec.m));
    } else {
        const Index p = std::min(spec.m, spec.n);
        const Matrix u = Eigen::HouseholderQR<Matrix>(gaussian(spec.m, p)).householderQ() * Matrix::Identity(spec.m, p);
        const Matrix v = Eigen::HouseholderQR<Matrix>(gaussian(spec.n, p)).householderQ() * Matrix::Identity(spec.n, p);
        Vector s(p);
        for (Index i = 0; i < p; ++i) {
            const double t = p > 1 ? static_cast<double>(i) / static_cast<double>(p - 1) : 0.0;
            s[i] = spec.scale * std::pow(spec.condition, -t);
        }
        a = u * s.asDiagonal() * v.transpose();
    }

    std::vector<Index> perm(static_cast<std::size_t>(spec.n));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    Vector x_true = Vector::Zero(spec.n);
    for (Index i = 0; i < spec.k; ++i) x_true[perm[static_cast<std::size_t>(i)]] = normal(rng);

    Vector b = a * x_true;
    const std::uint64_t noise_seed = rng();
    if (spec.noise) {
        if (spec.k == 0) {
            std::mt19937_64 noise_rng(noise_seed);
            std::normal_distribution<double> e(0.0, 1e-3);
            for (Index i = 0; i < b.size(); ++i) b[i] += e(noise_rng);
        } else {
            b = add_noise_60db(b, noise_seed);
        }
    }

    SyntheticInstance out;
    out.data.features = a.sparseView(0.0, 0.0);
    out.data.features.makeCompressed();
    out.data.targets = std::move(b);
    std::ostringstream src;
    src << "synth:m=" << spec.m << ",n=" << spec.n << ",k=" << spec.k
        << ",profile=" << (spec.profile == SynthProfile::gaussian ? "gaussian" : "geometric")
        << ",cond=" << spec.condition << ",scale=" << spec.scale << ",noise=" << (spec.noise ? 1 : 0)
        << ",seed=" << spec.seed;
    out.data.source = src.str();
    out.x_true = std::move(x_true);
    return out;
}

// ---------------------------------------------------------------------------
// Transform replay
// ---------------------------------------------------------------------------

/**
 * Re-applies recorded transforms to raw data. Understood entries:
 * "expand:order=K[,constant]", "normalize" (column scaling only) and
 * "noise60db:seed=S".
 */
inline Dataset replay_transforms(const Dataset& raw, const std::vector<std::string>& transforms)
{
    Dataset ds = raw;
    for (const std::string& t : transforms) {
        if (t.rfind("expand:order=", 0) == 0) {
            ExpandOptions opt;
            std::string rest = t.substr(13);
            const auto comma = rest.find(',');
            if (comma != std::string::npos) {
                opt.include_constant = rest.substr(comma + 1) == "constant";
                rest = rest.substr(0, comma);
            }
            ds = polynomial_expand(ds, std::stoi(rest), opt);
        } else if (t == "normalize") {
            ds.features = ds.features * column_scales(ds.features).asDiagonal();
            ds.features.makeCompressed();
            ds.transforms.push_back(t);
        } else if (t.rfind("noise60db:seed=", 0) == 0) {
            ds.targets = add_noise_60db(ds.targets, std::stoull(t.substr(15)));
            ds.transforms.push_back(t);
        } else {
            throw std::invalid_argument("replay_transforms: unknown transform '" + t + "'");
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Binary cache (see docs/cache_format.md)
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr char cache_magic[8] = {'S', 'S', 'N', 'A', 'L', 'D', 'S', '1'};
inline constexpr std::uint32_t cache_version = 1;

template <class T>
void write_le(std::ostream& out, T value)
{
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T read_le(std::istream& in)
{
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw parse_error("truncated cache file", 0);
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

inline void write_string(std::ostream& out, const std::string& s)
{
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in)
{
    const auto len = read_le<std::uint32_t>(in);
    std::string s(len, '\0');
    if (len && !in.read(s.data(), len)) throw parse_error("truncated cache file", 0);
    return s;
}

} // namespace detail

inline void write_cache(const Dataset& ds, std::ostream& out)
{
    SparseMatrix a = ds.features;
    a.makeCompressed();
    out.write(detail::cache_magic, sizeof detail::cache_magic);
    detail::write_le<std::uint32_t>(out, detail::cache_version);
    detail::write_le<std::uint32_t>(out, 0);
    detail::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(a.rows()));
    detail::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(a.cols()));
    detail::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(a.nonZeros()));
    for (Index i = 0; i < ds.targets.size(); ++i) detail::write_le<double>(out, ds.targets[i]);
    for (Index j = 0; j <= a.cols(); ++j) detail::write_le<std::uint64_t>(out, static_cast<std::uint64_t>(a.outerIndexPtr()[j]));
    for (Index k = 0; k < a.nonZeros(); ++k) detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.innerIndexPtr()[k]));
    for (Index k = 0; k < a.nonZeros(); ++k) detail::write_le<double>(out, a.valuePtr()[k]);
    detail::write_string(out, ds.source);
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ds.transforms.size()));
    for (const auto& t : ds.transforms) detail::write_string(out, t);
    if (!out) throw std::runtime_error("write_cache: write failed");
}

inline Dataset read_cache(std::istream& in)
{
    char magic[8];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, detail::cache_magic, sizeof magic) != 0) {
        throw parse_error("not a dataset cache file", 0);
    }
    const auto version = detail::read_le<std::uint32_t>(in);
    if (version != detail::cache_version) throw parse_error("unsupported cache version " + std::to_string(version), 0);
    (void)detail::read_le<std::uint32_t>(in);
    const auto m = detail::read_le<std::uint64_t>(in);
    const auto n = detail::read_le<std::uint64_t>(in);
    const auto nnz = detail::read_le<std::uint64_t>(in);
    if (m > std::numeric_limits<std::uint32_t>::max() || n > std::numeric_limits<std::uint32_t>::max()
        || nnz > static_cast<std::uint64_t>(std::numeric_limits<SparseMatrix::StorageIndex>::max())
        || (m > 0 && nnz / m > n) || (m == 0 && nnz > 0)) {
        throw parse_error("corrupt cache header", 0);
    }
    if (const auto here = in.tellg(); here != std::streampos(-1)) {
        in.seekg(0, std::ios::end);
        const auto remaining = static_cast<std::uint64_t>(in.tellg() - here);
        in.seekg(here);
        if (remaining < 8 * m + 8 * (n + 1) + 12 * nnz) throw parse_error("truncated cache file", 0);
    }
    Dataset ds;
    ds.targets.resize(static_cast<Index>(m));
    for (std::uint64_t i = 0; i < m; ++i) ds.targets[static_cast<Index>(i)] = detail::read_le<double>(in);
    std::vector<SparseMatrix::StorageIndex> outer(n + 1);
    std::vector<SparseMatrix::StorageIndex> inner(nnz);
    std::vector<double> values(nnz);
    for (auto& o : outer) {
        const auto v = detail::read_le<std::uint64_t>(in);
        if (v > nnz) throw parse_error("corrupt cache column pointers", 0);
        o = static_cast<SparseMatrix::StorageIndex>(v);
    }
    for (auto& r : inner) r = static_cast<SparseMatrix::StorageIndex>(detail::read_le<std::uint32_t>(in));
    for (auto& v : values) v = detail::read_le<double>(in);
    if (outer.front() != 0 || static_cast<std::uint64_t>(outer.back()) != nnz) throw parse_error("corrupt cache column pointers", 0);
    if (!std::is_sorted(outer.begin(), outer.end())) throw parse_error("corrupt cache column pointers", 0);
    for (std::uint64_t j = 0; j < n; ++j) {
        for (auto k = outer[j]; k < outer[j + 1]; ++k) {
            if (static_cast<std::uint64_t>(inner[static_cast<std::size_t>(k)]) >= m
                || (k > outer[j] && inner[static_cast<std::size_t>(k)] <= inner[static_cast<std::size_t>(k - 1)])) {
                throw parse_error("corrupt cache row indices", 0);
            }
        }
    }
    ds.features = Eigen::Map<const SparseMatrix>(static_cast<Index>(m), static_cast<Index>(n), static_cast<Index>(nnz),
                                                 outer.data(), inner.data(), values.data());
    ds.source = detail::read_string(in);
    const auto count = detail::read_le<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < count; ++i) ds.transforms.push_back(detail::read_string(in));
    return ds;
}

inline void write_cache_file(const Dataset& ds, const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    write_cache(ds, out);
}

inline Dataset read_cache_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    return read_cache(in);
}

} // namespace ssnal
