#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "sshiba/error.hpp"
#include "sshiba/io.hpp"

namespace sshiba {
namespace {

constexpr std::string_view kMagic = "SSHIBA1";
constexpr std::uint8_t kMatrixRecord = 0;
constexpr std::uint8_t kStringRecord = 1;

class Writer {
 public:
  void matrix(const std::string& name, const Matrix& m) {
    header(name, kMatrixRecord, static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols()));
    // Row-major on disk.
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) put_u64(std::bit_cast<std::uint64_t>(m(i, j)));
    }
  }
  void text(const std::string& name, const std::string& value) {
    header(name, kStringRecord, value.size(), 1);
    buf_.append(value);
  }
  void number(const std::string& name, std::uint64_t value) { text(name, std::to_string(value)); }
  void real(const std::string& name, double value) { matrix(name, Matrix::Constant(1, 1, value)); }
  void gamma(const std::string& prefix, const GammaFactor& g) {
    matrix(prefix + ".shape", g.shape);
    matrix(prefix + ".rate", g.rate);
  }
  void gaussian(const std::string& prefix, const GaussianFactor& g) {
    matrix(prefix + ".mean", g.mean);
    number(prefix + ".layout", static_cast<std::uint64_t>(g.layout));
    number(prefix + ".count", g.cov.size());
    for (std::size_t i = 0; i < g.cov.size(); ++i) matrix(prefix + ".cov." + std::to_string(i), g.cov[i]);
  }
  const std::string& bytes() const { return buf_; }

 private:
  void header(const std::string& name, std::uint8_t type, std::uint64_t rows, std::uint64_t cols) {
    put_u32(static_cast<std::uint32_t>(name.size()));
    buf_.append(name);
    buf_.push_back(static_cast<char>(type));
    put_u64(rows);
    put_u64(cols);
  }
  void put_u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void put_u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string buf_;
};

struct Record {
  std::uint8_t type = kMatrixRecord;
  Matrix matrix;
  std::string text;
};

class Reader {
 public:
  explicit Reader(std::string bytes) : buf_(std::move(bytes)) {}

  std::map<std::string, Record> records() {
    if (buf_.size() < kMagic.size() || buf_.compare(0, kMagic.size(), kMagic) != 0) {
      if (buf_.compare(0, 6, "SSHIBA") == 0) {
        raise(ErrorKind::kVersionMismatch, "unsupported model container version");
      }
      raise(ErrorKind::kCorruptRecord, "not a model file (bad magic)");
    }
    pos_ = kMagic.size();
    std::map<std::string, Record> out;
    while (pos_ < buf_.size()) {
      const std::uint32_t len = get_u32();
      std::string name = take(len);
      Record rec;
      rec.type = static_cast<std::uint8_t>(take(1)[0]);
      const std::uint64_t rows = get_u64();
      const std::uint64_t cols = get_u64();
      if (rec.type == kStringRecord) {
        if (cols != 1) corrupt(name, "bad string header");
        rec.text = take(rows);
      } else if (rec.type == kMatrixRecord) {
        if (rows != 0 && cols > (buf_.size() - pos_) / 8 / rows) corrupt(name, "truncated data");
        rec.matrix.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (Eigen::Index i = 0; i < rec.matrix.rows(); ++i) {
          for (Eigen::Index j = 0; j < rec.matrix.cols(); ++j) {
            rec.matrix(i, j) = std::bit_cast<double>(get_u64());
          }
        }
      } else {
        corrupt(name, "unknown record type");
      }
      if (!out.emplace(name, std::move(rec)).second) corrupt(name, "duplicate record");
    }
    return out;
  }

 private:
  [[noreturn]] static void corrupt(const std::string& name, const std::string& what) {
    raise(ErrorKind::kCorruptRecord, "record '" + name + "': " + what);
  }
  std::string take(std::uint64_t n) {
    if (n > buf_.size() - pos_) raise(ErrorKind::kCorruptRecord, "unexpected end of file");
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint32_t get_u32() {
    const std::string s = take(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[static_cast<std::size_t>(i)]);
    return v;
  }
  std::uint64_t get_u64() {
    const std::string s = take(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[static_cast<std::size_t>(i)]);
    return v;
  }
  std::string buf_;
  std::size_t pos_ = 0;
};

class RecordSet {
 public:
  explicit RecordSet(std::map<std::string, Record> records) : records_(std::move(records)) {}

  const Record& get(const std::string& name, std::uint8_t type) const {
    const auto it = records_.find(name);
    if (it == records_.end()) raise(ErrorKind::kCorruptRecord, "missing record '" + name + "'");
    if (it->second.type != type) raise(ErrorKind::kCorruptRecord, "record '" + name + "' has the wrong type");
    return it->second;
  }
  Matrix matrix(const std::string& name) const { return get(name, kMatrixRecord).matrix; }
  const std::string& text(const std::string& name) const { return get(name, kStringRecord).text; }
  std::uint64_t number(const std::string& name) const {
    const std::string& s = text(name);
    std::uint64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
      raise(ErrorKind::kCorruptRecord, "record '" + name + "' is not an integer");
    }
    return v;
  }
  double real(const std::string& name) const {
    const Matrix m = matrix(name);
    if (m.size() != 1) raise(ErrorKind::kCorruptRecord, "record '" + name + "' is not a scalar");
    return m(0, 0);
  }
  Vector vector(const std::string& name) const {
    const Matrix m = matrix(name);
    if (m.cols() != 1) raise(ErrorKind::kCorruptRecord, "record '" + name + "' is not a column");
    return m.col(0);
  }
  GammaFactor gamma(const std::string& prefix) const {
    GammaFactor g;
    g.shape = vector(prefix + ".shape");
    g.rate = vector(prefix + ".rate");
    return g;
  }
  GaussianFactor gaussian(const std::string& prefix) const {
    GaussianFactor g;
    g.mean = matrix(prefix + ".mean");
    const auto layout = number(prefix + ".layout");
    if (layout > 2) raise(ErrorKind::kCorruptRecord, "record '" + prefix + ".layout' out of range");
    g.layout = static_cast<CovarianceLayout>(layout);
    const auto count = number(prefix + ".count");
    const auto expected = g.layout == CovarianceLayout::kPerRow ? static_cast<std::uint64_t>(g.mean.rows()) : 1;
    if (count != expected) raise(ErrorKind::kCorruptRecord, "record '" + prefix + ".count' is inconsistent");
    for (std::uint64_t i = 0; i < count; ++i) g.cov.push_back(matrix(prefix + ".cov." + std::to_string(i)));
    return g;
  }

 private:
  std::map<std::string, Record> records_;
};

}  // namespace

void save_model(const ModelState& state, const std::filesystem::path& path) {
  Writer w;
  const Hyperparameters& hp = state.hp;
  w.real("hp.a_alpha", hp.a_alpha);
  w.real("hp.b_alpha", hp.b_alpha);
  w.real("hp.a_tau", hp.a_tau);
  w.real("hp.b_tau", hp.b_tau);
  w.real("hp.a_gamma", hp.a_gamma);
  w.real("hp.b_gamma", hp.b_gamma);
  w.number("hp.k_init", hp.k_init);
  w.real("hp.prune_threshold", hp.prune_threshold);
  w.real("hp.tol", hp.convergence_rel_tol);
  w.number("hp.max_iters", hp.max_iters);
  w.number("hp.restarts", hp.restarts);
  w.number("hp.seed", hp.seed);
  w.number("hp.distinct_streams", hp.distinct_restart_streams ? 1 : 0);
  w.number("hp.gram_updates", hp.gram_updates ? 1 : 0);
  w.number("k_current", state.k_current);
  w.gaussian("z", state.z);
  w.matrix("elbo_trace", Eigen::Map<const Matrix>(state.elbo_trace.data(),
                                                 static_cast<Eigen::Index>(state.elbo_trace.size()), 1));
  w.number("views", state.views.size());
  for (std::size_t m = 0; m < state.views.size(); ++m) {
    const ViewState& v = state.views[m];
    const std::string p = "view." + std::to_string(m) + ".";
    w.text(p + "name", v.spec.name);
    w.text(p + "kind", std::string(to_string(v.spec.kind)));
    w.number(p + "dim", v.spec.dim);
    w.number(p + "feature_selection", v.spec.feature_selection ? 1 : 0);
    w.gaussian(p + "w", v.w);
    w.gaussian(p + "b", v.b);
    w.gamma(p + "alpha", v.alpha);
    w.gamma(p + "tau", v.tau);
    w.gamma(p + "gamma", v.gamma);
    w.matrix(p + "x.mean", v.x.mean);
    w.matrix(p + "x.variance", v.x.variance);
    w.matrix(p + "xi", v.xi);
    w.matrix(p + "label_posterior", v.label_posterior);
    w.number(p + "degenerate_rows", v.degenerate_rows);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorKind::kCorruptRecord, "cannot write " + path.string());
  out.write(kMagic.data(), static_cast<std::streamsize>(kMagic.size()));
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) raise(ErrorKind::kCorruptRecord, "write failed for " + path.string());
}

ModelState load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::kCorruptRecord, "cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const RecordSet r(Reader(std::move(bytes)).records());

  ModelState s;
  Hyperparameters& hp = s.hp;
  hp.a_alpha = r.real("hp.a_alpha");
  hp.b_alpha = r.real("hp.b_alpha");
  hp.a_tau = r.real("hp.a_tau");
  hp.b_tau = r.real("hp.b_tau");
  hp.a_gamma = r.real("hp.a_gamma");
  hp.b_gamma = r.real("hp.b_gamma");
  hp.k_init = r.number("hp.k_init");
  hp.prune_threshold = r.real("hp.prune_threshold");
  hp.convergence_rel_tol = r.real("hp.tol");
  hp.max_iters = r.number("hp.max_iters");
  hp.restarts = r.number("hp.restarts");
  hp.seed = r.number("hp.seed");
  hp.distinct_restart_streams = r.number("hp.distinct_streams") != 0;
  hp.gram_updates = r.number("hp.gram_updates") != 0;
  s.k_current = r.number("k_current");
  s.z = r.gaussian("z");
  const Vector trace = r.vector("elbo_trace");
  s.elbo_trace.assign(trace.data(), trace.data() + trace.size());
  const auto views = r.number("views");
  for (std::uint64_t m = 0; m < views; ++m) {
    const std::string p = "view." + std::to_string(m) + ".";
    ViewState v;
    v.spec.name = r.text(p + "name");
    try {
      v.spec.kind = parse_view_kind(r.text(p + "kind"));
    } catch (const Error&) {
      raise(ErrorKind::kCorruptRecord, "record '" + p + "kind' is not a view kind");
    }
    v.spec.dim = r.number(p + "dim");
    v.spec.feature_selection = r.number(p + "feature_selection") != 0;
    v.w = r.gaussian(p + "w");
    v.b = r.gaussian(p + "b");
    v.alpha = r.gamma(p + "alpha");
    v.tau = r.gamma(p + "tau");
    v.gamma = r.gamma(p + "gamma");
    v.x.mean = r.matrix(p + "x.mean");
    v.x.variance = r.matrix(p + "x.variance");
    v.xi = r.matrix(p + "xi");
    v.label_posterior = r.matrix(p + "label_posterior");
    v.degenerate_rows = r.number(p + "degenerate_rows");
    s.views.push_back(std::move(v));
  }
  try {
    s.validate();
  } catch (const Error& e) {
    raise(ErrorKind::kCorruptRecord, e.what());
  }
  return s;
}

}  // namespace sshiba
