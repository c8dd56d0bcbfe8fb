#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "sshiba/engine.hpp"
#include "sshiba/error.hpp"
#include "sshiba/evaluation.hpp"
#include "sshiba/io.hpp"
#include "tempdir.hpp"

using namespace sshiba;
namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no sshiba::Error thrown");
  return ErrorKind::kUsage;
}

}  // namespace

TEST_CASE("csv reading") {
  TempDir dir("csv");
  write_file(dir / "a.csv", "1,2\n3,\n5,6\n");
  Mask mask;
  const Matrix m = read_csv(dir / "a.csv", false, &mask);
  CHECK(m.rows() == 3);
  CHECK(mask.count() == 1);
  CHECK(mask(1, 1));
  CHECK(m(2, 0) == 5.0);

  write_file(dir / "h.csv", "x,y\n1,NaN\nNA,4\n");
  const Matrix h = read_csv(dir / "h.csv", true, &mask, "NA");
  CHECK(h.rows() == 2);
  CHECK(mask(0, 1));
  CHECK(mask(1, 0));

  write_file(dir / "bad.csv", "1,2\n3,abc\n");
  CHECK(kind_of([&] { read_csv(dir / "bad.csv", false); }) == ErrorKind::kParseError);
  write_file(dir / "ragged.csv", "1,2\n3\n");
  CHECK(kind_of([&] { read_csv(dir / "ragged.csv", false); }) == ErrorKind::kShapeMismatch);
}

TEST_CASE("manifest loading") {
  TempDir dir("manifest");
  write_file(dir / "x.csv", "0.5,1.5\n,2\n3,4\n");
  write_file(dir / "c.csv", "0\n2\n1\n");
  write_file(dir / "manifest.ini",
             "# two views\n[view]\nname = x\npath = x.csv\nkind = real\n\n"
             "[view]\nname = c\npath = c.csv\nkind = categorical\ndim = 3\nrole = target\n");
  const Dataset ds = load_dataset(dir / "manifest.ini");
  CHECK(ds.data.n_samples == 3);
  CHECK(ds.data.views[0].missing.count() == 1);
  CHECK(ds.data.views[1].spec.dim == 3);
  CHECK(ds.roles[1] == ViewRole::kTarget);

  write_file(dir / "c.csv", "0\n4\n1\n");
  CHECK(kind_of([&] { load_dataset(dir / "manifest.ini"); }) == ErrorKind::kDomainError);

  write_file(dir / "c.csv", "0\n1\n");
  CHECK(kind_of([&] { load_dataset(dir / "manifest.ini"); }) == ErrorKind::kShapeMismatch);

  write_file(dir / "m2.ini", "[view]\nname = x\npath = x.csv\ncolour = red\n");
  CHECK(kind_of([&] { DatasetManifest::parse(dir / "m2.ini"); }) == ErrorKind::kParseError);
}

TEST_CASE("dataset round trip") {
  SyntheticConfig c;
  c.n = 25;
  c.seed = 6;
  c.views = {{ViewKind::kReal, 4, 0.0}, {ViewKind::kBinary, 3, 0.0}, {ViewKind::kCategorical, 4, 0.0}};
  SyntheticData syn = generate_synthetic(c);
  mask_random_cells(syn.data, 0, 0.2, 1);
  mask_random_cells(syn.data, 1, 0.2, 2);
  mask_random_cells(syn.data, 2, 0.2, 3);
  Dataset ds{syn.data, {ViewRole::kInput, ViewRole::kInput, ViewRole::kTarget}};
  TempDir dir("roundtrip");
  save_dataset(ds, dir.path());
  const Dataset back = load_dataset(dir / "manifest.ini");
  REQUIRE(back.data.views.size() == 3);
  for (std::size_t m = 0; m < 3; ++m) {
    const ViewData& a = ds.data.views[m];
    const ViewData& b = back.data.views[m];
    CHECK(a.spec.name == b.spec.name);
    CHECK(a.spec.kind == b.spec.kind);
    CHECK(a.spec.dim == b.spec.dim);
    CHECK(a.missing == b.missing);
    for (Eigen::Index i = 0; i < a.values.rows(); ++i)
      for (Eigen::Index j = 0; j < a.values.cols(); ++j)
        if (!a.missing(i, j)) CHECK(a.values(i, j) == b.values(i, j));
  }
  CHECK(back.roles == ds.roles);
}

TEST_CASE("model round trip") {
  SyntheticConfig c;
  c.n = 60;
  c.k_true = 2;
  c.seed = 4;
  c.noise_tau = 10.0;
  c.views = {{ViewKind::kReal, 5, 0.0}, {ViewKind::kBinary, 3, 0.0}, {ViewKind::kCategorical, 3, 0.0}};
  SyntheticData syn = generate_synthetic(c);
  mask_random_cells(syn.data, 1, 0.1, 5);
  Hyperparameters hp = fixtures::small_hp(20);
  hp.max_iters = 500;
  const FitResult r = fit(syn.data, hp);
  CHECK(r.report.k_final < 20);

  TempDir dir("model");
  save_model(r.state, dir / "m.sshiba");
  const ModelState back = load_model(dir / "m.sshiba");
  CHECK(back.k_current == r.report.k_final);
  CHECK(back.z.mean == r.state.z.mean);
  CHECK(back.elbo_trace == r.state.elbo_trace);
  CHECK(back.hp.seed == r.state.hp.seed);
  for (std::size_t m = 0; m < 3; ++m) {
    const ViewState& a = r.state.views[m];
    const ViewState& b = back.views[m];
    CHECK(a.spec.name == b.spec.name);
    CHECK(a.w.mean == b.w.mean);
    CHECK(a.w.cov == b.w.cov);
    CHECK(a.b.mean == b.b.mean);
    CHECK(a.alpha.shape == b.alpha.shape);
    CHECK(a.tau.rate == b.tau.rate);
    CHECK(a.gamma.rate == b.gamma.rate);
    CHECK(a.x.mean == b.x.mean);
    CHECK(a.xi == b.xi);
    CHECK(a.label_posterior == b.label_posterior);
  }
  save_model(back, dir / "again.sshiba");
  CHECK(read_file(dir / "m.sshiba") == read_file(dir / "again.sshiba"));

  const std::string bytes = read_file(dir / "m.sshiba");
  write_file(dir / "short.sshiba", bytes.substr(0, bytes.size() / 2));
  CHECK(kind_of([&] { load_model(dir / "short.sshiba"); }) == ErrorKind::kCorruptRecord);
  write_file(dir / "junk.sshiba", "not a model");
  CHECK(kind_of([&] { load_model(dir / "junk.sshiba"); }) == ErrorKind::kCorruptRecord);
  std::string newer = bytes;
  newer[6] = '2';
  write_file(dir / "v2.sshiba", newer);
  CHECK(kind_of([&] { load_model(dir / "v2.sshiba"); }) == ErrorKind::kVersionMismatch);
}

TEST_CASE("number formatting round-trips") {
  for (double v : {0.1, -1e-300, 123456789.123, 1.0 / 3.0}) CHECK(std::stod(format_double(v)) == v);
}
