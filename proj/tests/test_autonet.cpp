#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "damext/adam.hpp"
#include "damext/checkpoint.hpp"
#include "damext/gradsuite.hpp"
#include "damext/network.hpp"
#include "damext/rng.hpp"

using namespace damext;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("damext-test-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Tensor<double> plane3x3() {
  Tensor<double> x(1, 1, 3, 3);
  for (int i = 0; i < 9; ++i) x.data[i] = i + 1;
  return x;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("rng basics") {
  SUBCASE("same seed, same stream") {
    Rng a(123), b(123);
    for (int i = 0; i < 32; ++i) CHECK(a.next_u64() == b.next_u64());
  }
  SUBCASE("named substreams differ from each other and the base stream") {
    Rng base(5);
    Rng data = Rng::substream(5, "data");
    Rng init = Rng::substream(5, "init");
    CHECK(data.next_u64() != init.next_u64());
    CHECK(base.next_u64() != Rng::substream(5, "data").next_u64());
  }
  SUBCASE("splitmix64 and fnv1a match published vectors") {
    CHECK(Rng::splitmix64(0) == 0xE220A8397B1DCDAFULL);
    CHECK(Rng::fnv1a("") == 0xcbf29ce484222325ULL);
    CHECK(Rng::fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  }
  SUBCASE("uniform and index ranges") {
    Rng rng(7);
    bool lo = false, hi = false;
    for (int i = 0; i < 1000; ++i) {
      const double u = rng.uniform();
      CHECK(u >= 0.0);
      CHECK(u < 1.0);
      const int k = rng.uniform_int(2, 4);
      CHECK(k >= 2);
      CHECK(k <= 4);
      lo = lo || k == 2;
      hi = hi || k == 4;
      CHECK(rng.index(6) < 6);
    }
    CHECK(lo);
    CHECK(hi);
  }
  SUBCASE("shuffle is a deterministic permutation") {
    std::vector<int> v(20);
    std::iota(v.begin(), v.end(), 0);
    std::vector<int> w = v;
    Rng a(9), b(9);
    a.shuffle(v);
    b.shuffle(w);
    CHECK(v == w);
    std::sort(w.begin(), w.end());
    std::vector<int> id(20);
    std::iota(id.begin(), id.end(), 0);
    CHECK(w == id);
  }
  SUBCASE("categorical honors weights; all-zero falls back to uniform") {
    Rng rng(11);
    const std::vector<double> skew{0.0, 3.0, 0.0};
    for (int i = 0; i < 50; ++i) CHECK(rng.categorical(skew) == 1);
    const std::vector<double> zero{0.0, 0.0, 0.0, 0.0};
    std::vector<int> hits(4, 0);
    for (int i = 0; i < 400; ++i) ++hits[rng.categorical(zero)];
    for (int h : hits) CHECK(h > 0);
  }
}

TEST_CASE("signature hashing separates decision paths") {
  const std::uint64_t a = sig_push(sig_push(sig_init(), true), false);
  const std::uint64_t b = sig_push(sig_push(sig_init(), false), true);
  const std::uint64_t c = sig_push(sig_push(sig_init(), true), false);
  CHECK(a != b);
  CHECK(a == c);
  CHECK(sig_mix(a, b) != a);
}

TEST_CASE("tensor layout is sample-major planar") {
  Tensor<double> t(2, 3, 4, 5);
  t.at(1, 2, 3, 4) = 42.0;
  CHECK(t.data[((1 * 3 + 2) * 4 + 3) * 5 + 4] == 42.0);
  CHECK(t.plane(1, 2)[3 * 5 + 4] == 42.0);
  CHECK(t.sample(1)[(2 * 4 + 3) * 5 + 4] == 42.0);
}

TEST_CASE("conv3x3 kernels address the expected taps") {
  const Tensor<double> x = plane3x3();

  SUBCASE("center tap is the identity") {
    Matrix<double> w = Matrix<double>::Zero(1, 9);
    w(0, 4) = 1.0;  // ci=0, ky=1, kx=1
    const Tensor<double> y = conv3x3_forward<double>(x, w, nullptr);
    for (int i = 0; i < 9; ++i) CHECK(y.data[i] == doctest::Approx(x.data[i]));
  }
  SUBCASE("corner tap shifts with zero padding") {
    Matrix<double> w = Matrix<double>::Zero(1, 9);
    w(0, 0) = 1.0;  // ky=0, kx=0 reads input(y-1, x-1)
    const Tensor<double> y = conv3x3_forward<double>(x, w, nullptr);
    CHECK(y.at(0, 0, 0, 0) == doctest::Approx(0.0));
    CHECK(y.at(0, 0, 1, 1) == doctest::Approx(x.at(0, 0, 0, 0)));
    CHECK(y.at(0, 0, 2, 2) == doctest::Approx(x.at(0, 0, 1, 1)));
  }
  SUBCASE("bias adds per output channel") {
    Matrix<double> w = Matrix<double>::Zero(2, 9);
    Matrix<double> b(2, 1);
    b << 1.5, -0.5;
    const Tensor<double> y = conv3x3_forward(x, w, &b);
    CHECK(y.at(0, 0, 1, 1) == doctest::Approx(1.5));
    CHECK(y.at(0, 1, 1, 1) == doctest::Approx(-0.5));
  }
}

TEST_CASE("downsample averages over the pixels that exist") {
  const Tensor<double> x = plane3x3();
  const Tensor<double> y = downsample2_forward(x);
  REQUIRE(y.h == 2);
  REQUIRE(y.w == 2);
  CHECK(y.at(0, 0, 0, 0) == doctest::Approx((1 + 2 + 4 + 5) / 4.0));
  CHECK(y.at(0, 0, 0, 1) == doctest::Approx((3 + 6) / 2.0));
  CHECK(y.at(0, 0, 1, 0) == doctest::Approx((7 + 8) / 2.0));
  CHECK(y.at(0, 0, 1, 1) == doctest::Approx(9.0));
}

TEST_CASE("bilinear upsample uses clamped half-pixel centers") {
  Tensor<double> x(1, 1, 1, 2);
  x.data[0] = 0.0;
  x.data[1] = 1.0;
  const Tensor<double> y = upsample2_forward(x);
  REQUIRE(y.w == 4);
  CHECK(y.at(0, 0, 0, 0) == doctest::Approx(0.0));
  CHECK(y.at(0, 0, 0, 1) == doctest::Approx(0.25));
  CHECK(y.at(0, 0, 0, 2) == doctest::Approx(0.75));
  CHECK(y.at(0, 0, 0, 3) == doctest::Approx(1.0));
}

TEST_CASE("global average pool and dense") {
  const Tensor<double> x = plane3x3();
  const Tensor<double> g = global_avg_pool_forward(x);
  CHECK(g.at(0, 0, 0, 0) == doctest::Approx(5.0));

  Tensor<double> f(1, 2, 1, 1);
  f.data[0] = 5.0;
  f.data[1] = 6.0;
  Matrix<double> w(2, 2);
  w << 1, 2, 3, 4;
  Matrix<double> b(2, 1);
  b << 0.5, -0.5;
  const Tensor<double> y = dense_forward(f, w, &b);
  CHECK(y.at(0, 0, 0, 0) == doctest::Approx(17.5));
  CHECK(y.at(0, 1, 0, 0) == doctest::Approx(38.5));
  Matrix<double> wrong(2, 3);
  CHECK_THROWS_AS(dense_forward<double>(f, wrong, nullptr), ShapeError);
}

TEST_CASE("l2 normalize") {
  Tensor<double> x(2, 2, 1, 1);
  x.data[0] = 3.0;
  x.data[1] = 4.0;
  x.data[2] = 0.0;
  x.data[3] = 0.0;
  bool zero = false;
  const Tensor<double> y = l2normalize_forward(x, &zero);
  CHECK(y.data[0] == doctest::Approx(0.6));
  CHECK(y.data[1] == doctest::Approx(0.8));
  CHECK(y.data[2] == 0.0);
  CHECK(y.data[3] == 0.0);
  CHECK(zero);
}

TEST_CASE("make_network rejects inconsistent topologies") {
  CHECK_THROWS_AS(make_network<double>({}, 3), ConfigError);
  CHECK_THROWS_AS(make_network<double>({{LayerKind::Conv3x3, 4, 8, true}}, 3), ConfigError);
  CHECK_THROWS_AS(make_network<double>({{LayerKind::Conv3x3, 3, 8, true}}, 3, 5), ConfigError);
  // conv after spatial collapse
  CHECK_THROWS_AS(make_network<double>({{LayerKind::Conv3x3, 3, 4, true},
                                        {LayerKind::GlobalAvgPool},
                                        {LayerKind::Conv3x3, 4, 4, true}},
                                       3),
                  ConfigError);
}

TEST_CASE("forward, tap injection, and stale tapes") {
  std::vector<LayerSpec> layers = {
      {LayerKind::Conv3x3, 3, 4, true},
      {LayerKind::Relu},
      {LayerKind::Conv3x3, 4, 1, true},
  };
  Network<double> net = make_network<double>(std::move(layers), 3, /*tap=*/1);
  Rng rng(21);
  init_params(net, rng);

  Tensor<double> x(2, 3, 6, 6);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data[i] = rng.uniform(-1, 1);
  Tape<double> tape = forward(net, x);
  REQUIRE(tape.outputs.size() == net.layers.size());
  CHECK(tape.output().c == 1);
  CHECK(tape.output().h == 6);

  SUBCASE("tap gradient reaches the first conv") {
    Tensor<double> dz(2, 1, 6, 6);  // zero: no signal through the head
    Tensor<double> dtap(2, 4, 6, 6);
    dtap.data.setConstant(0.1);
    net.params.zero_grads();
    backward(net, tape, dz, &dtap);
    CHECK(net.weight(0).grad.cwiseAbs().maxCoeff() > 0.0);
    CHECK(net.weight(2).grad.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("wrong-shape output gradient throws") {
    Tensor<double> bad(2, 2, 6, 6);
    CHECK_THROWS_AS(backward(net, tape, bad), ShapeError);
  }
  SUBCASE("a shortened tape is rejected") {
    tape.outputs.pop_back();
    Tensor<double> dz(2, 1, 6, 6);
    CHECK_THROWS_AS(backward(net, tape, dz), DataError);
  }
  SUBCASE("channel mismatch at the input throws") {
    Tensor<double> bad(1, 2, 6, 6);
    CHECK_THROWS_AS(forward(net, bad), ShapeError);
  }
}

TEST_CASE("init_params is deterministic and fan-in bounded") {
  auto build = [] {
    return make_network<double>({{LayerKind::Conv3x3, 3, 8, true},
                                 {LayerKind::Relu},
                                 {LayerKind::Dense, 8 * 4 * 4, 5, true}},
                                3, -1, 4);
  };
  Network<double> a = build(), b = build();
  Rng ra(33), rb(33);
  init_params(a, ra);
  init_params(b, rb);
  REQUIRE(a.params.entries.size() == b.params.entries.size());
  for (std::size_t i = 0; i < a.params.entries.size(); ++i)
    CHECK((a.params.entries[i].value.array() == b.params.entries[i].value.array()).all());

  const double bound = std::sqrt(6.0 / (3 * 9));
  CHECK(a.weight(0).value.cwiseAbs().maxCoeff() <= bound);
  CHECK(a.weight(0).value.cwiseAbs().maxCoeff() > 0.0);
  CHECK(a.bias(0).value.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adam step matches the hand-computed update") {
  ParamStore<double> ps;
  ps.entries.emplace_back("w", 1, 1);
  ps.entries[0].value(0, 0) = 1.0;
  ps.entries[0].grad(0, 0) = 0.5;
  adam_step(ps, 0.1, 1);
  // m-hat = g, v-hat = g^2 at step 1, so the update is lr * g / (|g| + eps)
  CHECK(ps.entries[0].value(0, 0) == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)));

  SUBCASE("step index starts at one") {
    CHECK_THROWS_AS(adam_step(ps, 0.1, 0), ConfigError);
  }
  SUBCASE("non-finite gradients are flagged") {
    ps.entries[0].grad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(adam_step(ps, 0.1, 2), NumericError);
  }
}

TEST_CASE("polynomial decay") {
  CHECK(poly_decay(1.0, 0, 10) == doctest::Approx(1.0));
  CHECK(poly_decay(2.0, 5, 10) == doctest::Approx(2.0 * std::pow(0.5, 0.9)));
  CHECK(poly_decay(1.0, 9, 10) == doctest::Approx(std::pow(0.1, 0.9)));
  CHECK(poly_decay(1.0, 3, 12, 2.0) == doctest::Approx(std::pow(0.75, 2.0)));
  CHECK_THROWS_AS(poly_decay(1.0, 10, 10), ConfigError);
  CHECK_THROWS_AS(poly_decay(1.0, -1, 10), ConfigError);
  CHECK_THROWS_AS(poly_decay(1.0, 0, 0), ConfigError);
}

TEST_CASE("gradient check suite passes on a couple of seeds") {
  const GradSuiteResult r = run_gradcheck_suite(2);
  CHECK(r.passed);
  CHECK(r.checked > 0);
  CHECK(r.max_rel_err < 1e-4);
  CHECK(r.cases.size() == 4);
}

TEST_CASE("checkpoint round trip") {
  const fs::path dir = temp_dir("ckpt");
  Network<double> net = make_network<double>({{LayerKind::Conv3x3, 3, 4, true},
                                              {LayerKind::Relu},
                                              {LayerKind::GlobalAvgPool},
                                              {LayerKind::Dense, 4, 3, true},
                                              {LayerKind::L2Normalize}},
                                             3, -1, 16);
  Rng rng(55);
  init_params(net, rng);
  save_checkpoint(dir / "a.ckpt", net);
  const Network<double> back = load_checkpoint<double>(dir / "a.ckpt");

  REQUIRE(back.layers.size() == net.layers.size());
  CHECK(back.input_size == 16);
  CHECK(back.tap == -1);
  for (std::size_t i = 0; i < net.layers.size(); ++i)
    CHECK(back.layers[i].kind == net.layers[i].kind);
  REQUIRE(back.params.entries.size() == net.params.entries.size());
  for (std::size_t i = 0; i < net.params.entries.size(); ++i) {
    const auto& orig = net.params.entries[i].value;
    const auto& got = back.params.entries[i].value;
    REQUIRE(got.rows() == orig.rows());
    REQUIRE(got.cols() == orig.cols());
    for (Eigen::Index j = 0; j < orig.size(); ++j) {
      // stored as float32
      CHECK(got.data()[j] == static_cast<double>(static_cast<float>(orig.data()[j])));
    }
  }

  SUBCASE("re-saving a loaded net is byte identical") {
    save_checkpoint(dir / "b.ckpt", back);
    CHECK(read_bytes(dir / "a.ckpt") == read_bytes(dir / "b.ckpt"));
  }
  SUBCASE("garbage and truncated files are rejected") {
    std::ofstream(dir / "junk.ckpt", std::ios::binary) << "not a checkpoint";
    CHECK_THROWS_AS(load_checkpoint<double>(dir / "junk.ckpt"), DataError);
    const std::string full = read_bytes(dir / "a.ckpt");
    std::ofstream(dir / "cut.ckpt", std::ios::binary)
        << full.substr(0, full.size() / 2);
    CHECK_THROWS_AS(load_checkpoint<double>(dir / "cut.ckpt"), DataError);
  }
}
