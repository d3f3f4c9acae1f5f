#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "aniadapter/checkpoint.hpp"
#include "aniadapter/encoder.hpp"
#include "aniadapter/error.hpp"

using namespace aniadapter;

namespace {

EncoderSpec tiny_spec() {
    EncoderSpec s;
    s.image_h = s.image_w = 4;
    s.patch = 2;  // N = 1 + 4 = 5
    s.hidden_dim = 4;
    s.layers = 3;
    s.k = 2;
    s.target_dim = 3;
    return s;
}

LayerStack random_stack(Rng& rng, int k, int n, int d) {
    LayerStack st;
    for (int i = 0; i < k; ++i) st.z.push_back(random_matrix(rng, n, d));
    return st;
}

Image noise_image(int h, int w, uint64_t seed) {
    Rng rng(seed);
    Image img(h, w);
    for (double& p : img.pix) p = rng.uniform();
    return img;
}

}  // namespace

TEST_CASE("patch token count") {
    EncoderSpec s;
    s.image_h = s.image_w = 224;
    s.patch = 14;
    CHECK(patch_token_count(s) == 257);

    s.image_h = s.image_w = s.patch = 16;  // single patch
    CHECK(patch_token_count(s) == 2);

    s.image_h = 224;
    s.image_w = 225;
    s.patch = 14;
    CHECK_THROWS_AS(patch_token_count(s), DataError);
}

TEST_CASE("surrogate encoder determinism and shapes") {
    EncoderSpec spec = tiny_spec();
    SurrogateVisionEncoder a(spec, 1234), b(spec, 1234), c(spec, 999);
    Image img = noise_image(spec.image_h, spec.image_w, 5);

    LayerStack sa = a.encode(img, "x");
    LayerStack sb = b.encode(img, "x");
    REQUIRE(sa.z.size() == size_t(spec.k));
    int n = patch_token_count(spec);
    for (const Mat& z : sa.z) {
        CHECK(z.rows() == n);
        CHECK(z.cols() == spec.hidden_dim);
    }
    for (size_t i = 0; i < sa.z.size(); ++i) CHECK((sa.z[i] - sb.z[i]).cwiseAbs().maxCoeff() == 0.0);

    // different seed, different weights
    LayerStack sc = c.encode(img, "x");
    CHECK((sa.z[0] - sc.z[0]).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("encode k boundaries") {
    EncoderSpec spec = tiny_spec();
    spec.k = spec.layers;  // full stack
    SurrogateVisionEncoder full(spec, 7);
    CHECK(full.encode(noise_image(4, 4, 1), "a").z.size() == size_t(spec.layers));

    spec.k = 1;  // last layer only
    SurrogateVisionEncoder last(spec, 7);
    CHECK(last.encode(noise_image(4, 4, 1), "a").z.size() == 1);
}

TEST_CASE("aggregate: identity configuration") {
    // k=1, alpha=1, identity projection, no normalization -> passthrough
    Rng rng(3);
    int n = 5, d = 4;
    LayerStack st = random_stack(rng, 1, n, d);
    AggregatorParams p;
    p.alphas = Vec::Ones(1);
    p.proj = {Mat::Identity(d, d)};
    p.ln_gamma = Vec::Ones(d);
    p.ln_beta = Vec::Zero(d);
    p.ln_bypass = true;
    Mat out = aggregate(st, p);
    CHECK((out - st.z[0]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("aggregate: zero alphas zero the sum") {
    Rng rng(4);
    EncoderSpec spec = tiny_spec();
    LayerStack st = random_stack(rng, spec.k, 5, spec.hidden_dim);
    Rng prng(9);
    AggregatorParams p = AggregatorParams::init(spec, prng);
    p.alphas.setZero();
    p.ln_bypass = true;
    AggregateCache cache;
    Mat out = aggregate(st, p, &cache);
    CHECK(out.cwiseAbs().maxCoeff() == 0.0);
    CHECK(cache.pre_norm.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("aggregate: hand oracle") {
    // k=2, D=D'=3, N=2, scalar-loop oracle for the weighted projected sum
    LayerStack st;
    Mat z0(2, 3), z1(2, 3);
    z0 << 1, 2, 3, 4, 5, 6;
    z1 << -1, 0, 2, 3, -2, 1;
    st.z = {z0, z1};
    Mat w0(3, 3), w1(3, 3);
    w0 << 1, 0, 1, 0, 2, 0, 1, 1, 0;
    w1 << 2, 1, 0, 0, 1, 1, 1, 0, 2;
    AggregatorParams p;
    p.alphas = Vec(2);
    p.alphas << 0.5, -0.25;
    p.proj = {w0, w1};
    p.ln_gamma = Vec(3);
    p.ln_gamma << 1.5, 0.5, 1.0;
    p.ln_beta = Vec(3);
    p.ln_beta << 0.1, -0.2, 0.0;

    Mat expect = Mat::Zero(2, 3);
    for (int l = 0; l < 2; ++l) {
        const Mat& z = st.z[size_t(l)];
        const Mat& w = p.proj[size_t(l)];
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 3; ++c) {
                double acc = 0;
                for (int m = 0; m < 3; ++m) acc += z(r, m) * w(m, c);
                expect(r, c) += p.alphas[l] * acc;
            }
    }

    p.ln_bypass = true;
    CHECK((aggregate(st, p) - expect).cwiseAbs().maxCoeff() <= 1e-12);

    // and through the row normalization, against a scalar oracle
    p.ln_bypass = false;
    Mat norm_expect(2, 3);
    for (int r = 0; r < 2; ++r) {
        double mu = (expect(r, 0) + expect(r, 1) + expect(r, 2)) / 3.0;
        double var = 0;
        for (int c = 0; c < 3; ++c) var += (expect(r, c) - mu) * (expect(r, c) - mu);
        var /= 3.0;
        for (int c = 0; c < 3; ++c)
            norm_expect(r, c) =
                (expect(r, c) - mu) / std::sqrt(var + 1e-5) * p.ln_gamma[c] + p.ln_beta[c];
    }
    CHECK((aggregate(st, p) - norm_expect).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("aggregate: token locality under row permutation") {
    Rng rng(11);
    EncoderSpec spec = tiny_spec();
    int n = patch_token_count(spec);
    LayerStack st = random_stack(rng, spec.k, n, spec.hidden_dim);
    Rng prng(12);
    AggregatorParams p = AggregatorParams::init(spec, prng);

    Mat base = aggregate(st, p);

    // rotate the non-class rows by one
    std::vector<int> perm(size_t(n), 0);
    for (int i = 1; i < n; ++i) perm[size_t(i)] = 1 + (i % (n - 1));
    LayerStack permuted;
    for (const Mat& z : st.z) {
        Mat pz(n, z.cols());
        for (int i = 0; i < n; ++i) pz.row(i) = z.row(perm[size_t(i)]);
        permuted.z.push_back(pz);
    }
    Mat out = aggregate(permuted, p);
    for (int i = 0; i < n; ++i)
        CHECK((out.row(i) - base.row(perm[size_t(i)])).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("aggregate: linearity with normalization bypassed") {
    Rng rng(21);
    EncoderSpec spec = tiny_spec();
    int n = 5;
    LayerStack s1 = random_stack(rng, spec.k, n, spec.hidden_dim);
    LayerStack s2 = random_stack(rng, spec.k, n, spec.hidden_dim);
    Rng prng(22);
    AggregatorParams p = AggregatorParams::init(spec, prng);
    p.ln_bypass = true;

    LayerStack sum;
    for (size_t i = 0; i < s1.z.size(); ++i) sum.z.push_back(2.0 * s1.z[i] + 3.0 * s2.z[i]);
    Mat lhs = aggregate(sum, p);
    Mat rhs = 2.0 * aggregate(s1, p) + 3.0 * aggregate(s2, p);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);

    // linear in each alpha
    AggregatorParams doubled = p;
    doubled.alphas *= 2.0;
    CHECK((aggregate(s1, doubled) - 2.0 * aggregate(s1, p)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("aggregate: shape contract over k") {
    EncoderSpec spec = tiny_spec();
    int n = patch_token_count(spec);
    for (int k = 1; k <= spec.layers; ++k) {
        spec.k = k;
        Rng rng(30 + uint64_t(k));
        LayerStack st = random_stack(rng, k, n, spec.hidden_dim);
        Rng prng(40 + uint64_t(k));
        AggregatorParams p = AggregatorParams::init(spec, prng);
        Mat out = aggregate(st, p);
        CHECK(out.rows() == n);
        CHECK(out.cols() == spec.target_dim);
    }
}

TEST_CASE("aggregate: shape errors") {
    Rng rng(50);
    LayerStack st = random_stack(rng, 2, 4, 3);
    st.z[1] = random_matrix(rng, 5, 3);  // row mismatch
    EncoderSpec spec = tiny_spec();
    spec.hidden_dim = 3;
    Rng prng(51);
    AggregatorParams p = AggregatorParams::init(spec, prng);
    CHECK_THROWS_AS(aggregate(st, p), DataError);
    CHECK_THROWS_AS(aggregate(LayerStack{}, p), DataError);
}

TEST_CASE("aggregator init") {
    EncoderSpec spec = tiny_spec();
    Rng rng(60);
    AggregatorParams p = AggregatorParams::init(spec, rng);
    REQUIRE(p.alphas.size() == spec.k);
    for (int i = 0; i < spec.k; ++i) CHECK(p.alphas[i] == doctest::Approx(1.0 / spec.k));
    CHECK(p.ln_gamma.isApprox(Vec::Ones(spec.target_dim)));
    CHECK(p.ln_beta.cwiseAbs().maxCoeff() == 0.0);
    // near-isometric: columns orthogonal with norm sqrt(D'/D)
    double want = double(spec.target_dim) / double(spec.hidden_dim);
    for (const Mat& w : p.proj) {
        Mat gram = w.transpose() * w;
        CHECK((gram - want * Mat::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() <=
              1e-9);
    }

    EncoderSpec bad = spec;
    bad.k = bad.layers + 1;
    Rng rng2(61);
    CHECK_THROWS_AS(AggregatorParams::init(bad, rng2), DataError);
}

TEST_CASE("aggregate gradients match finite differences") {
    Rng rng(70);
    EncoderSpec spec = tiny_spec();
    int n = 3;
    LayerStack st = random_stack(rng, spec.k, n, spec.hidden_dim);
    Rng prng(71);
    AggregatorParams p = AggregatorParams::init(spec, prng);
    p.ln_gamma = Vec::Ones(spec.target_dim) + 0.1 * random_matrix(prng, spec.target_dim, 1).col(0);
    p.ln_beta = 0.05 * random_matrix(prng, spec.target_dim, 1).col(0);
    Mat weights = random_matrix(rng, n, spec.target_dim);  // loss = sum(out .* weights)

    auto loss = [&](const AggregatorParams& q) {
        return (aggregate(st, q).array() * weights.array()).sum();
    };

    AggregateCache cache;
    aggregate(st, p, &cache);
    AggregateGrads g = aggregate_backward(cache, p, weights);

    const double h = 1e-5;
    auto check_fd = [&](double analytic, double* slot) {
        double keep = *slot;
        *slot = keep + h;
        double up = loss(p);
        *slot = keep - h;
        double dn = loss(p);
        *slot = keep;
        double fd = (up - dn) / (2 * h);
        // the floor keeps near-zero gradients from amplifying FD roundoff
        double rel = std::abs(analytic - fd) / std::max({std::abs(fd), std::abs(analytic), 1e-4});
        CHECK(rel < 1e-4);
    };

    for (int i = 0; i < p.alphas.size(); ++i) check_fd(g.dalphas[i], &p.alphas[i]);
    for (size_t l = 0; l < p.proj.size(); ++l)
        for (int i = 0; i < p.proj[l].size(); ++i)
            check_fd(g.dproj[l].data()[i], p.proj[l].data() + i);
    for (int i = 0; i < p.ln_gamma.size(); ++i) check_fd(g.dln_gamma[i], &p.ln_gamma[i]);
    for (int i = 0; i < p.ln_beta.size(); ++i) check_fd(g.dln_beta[i], &p.ln_beta[i]);
}

TEST_CASE("file-backed layer stacks") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "aniadapter_stack_test";
    fs::create_directories(dir);

    EncoderSpec spec = tiny_spec();
    SurrogateVisionEncoder enc(spec, 77);
    Image img = noise_image(4, 4, 8);
    LayerStack st = enc.encode(img, "sample");

    TensorArchive ar;
    for (size_t i = 0; i < st.z.size(); ++i) ar.add("z" + std::to_string(i), st.z[i]);
    ar.save((dir / "sample.tensors").string());

    FileVisionBackend file_backend(spec, dir.string());
    LayerStack back = encode_layers(img, file_backend, "sample");
    REQUIRE(back.z.size() == st.z.size());
    for (size_t i = 0; i < st.z.size(); ++i)
        CHECK((back.z[i] - st.z[i]).cwiseAbs().maxCoeff() == 0.0);

    // missing id surfaces as a backend failure with context
    CHECK_THROWS_AS(encode_layers(img, file_backend, "missing"), BackendError);
    fs::remove_all(dir);
}
