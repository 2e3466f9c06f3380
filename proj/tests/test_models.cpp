#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "pacbound/core/oracle.hpp"
#include "pacbound/core/term.hpp"
#include "pacbound/models/features.hpp"
#include "pacbound/models/stochastic.hpp"

using namespace pacbound;

namespace {

MlpSpec tiny_base() {
    MlpSpec s;
    s.layer_sizes = {1, 1};
    return s;
}

// Hypernet with every weight zero and a fixed output bias, so the produced
// base weights are the bias regardless of the latent draw.
StochasticClassifier constant_f1(const MlpSpec& base, const std::vector<double>& theta0,
                                 double sigma, std::size_t d = 2) {
    MlpSpec hs;
    hs.layer_sizes = {d, base.param_count()};
    hs.output = OutputLayer::Identity;
    MlpParams hyper = MlpParams::zeros(hs);
    for (std::size_t i = 0; i < theta0.size(); ++i) hyper.biases[0][i] = theta0[i];
    return {base, hyper, sigma};
}

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }

}  // namespace

TEST_CASE("noise-free constant hypernet pins the base weights") {
    auto f1 = constant_f1(tiny_base(), {1.25, -0.5}, 0.0);
    Rng rng(3);
    for (int i = 0; i < 5; ++i) {
        auto f0 = sample_classifier(f1, rng);
        CHECK(f0.params.weights[0][0] == 1.25);
        CHECK(f0.params.biases[0][0] == -0.5);
    }
}

TEST_CASE("sampled weight mean matches a quadrature oracle over the latent") {
    MlpSpec base = tiny_base();
    MlpSpec hs;
    hs.layer_sizes = {1, 3, 2};
    hs.output = OutputLayer::Identity;
    Rng init(41);
    StochasticClassifier f1{base, MlpParams::random(hs, init, 1.5), 0.05};

    std::vector<double> oracle(2, 0.0);
    const double step = 1e-3;
    for (double z = -8.0; z <= 8.0; z += step) {
        Tensor out = mlp_forward(f1.hyper, Tensor::row({z}));
        const double w = normal_pdf(z) * step;
        for (std::size_t c = 0; c < 2; ++c) oracle[c] += w * out[c];
    }

    const std::size_t n = 10000;
    Rng rng(7);
    std::vector<std::vector<double>> draws;
    for (std::size_t i = 0; i < n; ++i)
        draws.push_back(sample_classifier(f1, rng).params.flatten());
    for (std::size_t c = 0; c < 2; ++c) {
        double mean = 0.0;
        for (const auto& d : draws) mean += d[c];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (const auto& d : draws) var += (d[c] - mean) * (d[c] - mean);
        const double se = std::sqrt(var / static_cast<double>(n - 1) / static_cast<double>(n));
        INFO("coordinate " << c);
        CHECK(std::abs(mean - oracle[c]) <= 3.0 * se);
    }
}

TEST_CASE("positive noise scale makes distinct draws distinct") {
    auto f1 = constant_f1(tiny_base(), {0.0, 0.0}, 0.2);
    Rng rng(5);
    auto a = sample_classifier(f1, rng).params.flatten();
    auto b = sample_classifier(f1, rng).params.flatten();
    CHECK(a != b);
}

TEST_CASE("collapsed stochastic classifier predicts exactly like its base") {
    auto f1 = constant_f1(tiny_base(), {2.0, -0.5}, 0.0);
    DeterministicClassifier f0{MlpParams::unflatten(tiny_base(), {2.0, -0.5})};
    Tensor x = Tensor::row({0.7});
    Rng rng(11);
    CHECK(predict_prob(f1, x, 50, rng) == Catch::Approx(f0.prob(x)).epsilon(1e-12));
}

TEST_CASE("balanced two-branch classifier predicts one half") {
    // Saturated tanh splits the latent in two; the branches push the output
    // bias to +/-4 symmetrically.
    MlpSpec hs;
    hs.layer_sizes = {1, 1, 2};
    hs.output = OutputLayer::Identity;
    MlpParams hyper = MlpParams::zeros(hs);
    hyper.weights[0][0] = 60.0;
    hyper.weights[1].at(1, 0) = 4.0;
    StochasticClassifier f1{tiny_base(), hyper, 0.0};

    Rng rng(13);
    const double p = predict_prob(f1, Tensor::row({0.0}), 20000, rng);
    CHECK(p == Catch::Approx(0.5).margin(0.02));
}

TEST_CASE("predictive probability matches the exact enumeration oracle") {
    // Latent threshold at -0.5 picks bias +2 or -2; exact branch masses come
    // from the normal cdf.
    MlpSpec hs;
    hs.layer_sizes = {1, 1, 2};
    hs.output = OutputLayer::Identity;
    MlpParams hyper = MlpParams::zeros(hs);
    hyper.weights[0][0] = 50.0;
    hyper.biases[0][0] = 25.0;
    hyper.weights[1].at(1, 0) = 2.0;
    StochasticClassifier f1{tiny_base(), hyper, 0.0};

    const double p_hi = 0.5 * std::erfc(-0.5 / std::sqrt(2.0));
    auto branch = std::make_shared<const ValueDist>(ValueDist::from_masses(
        {{Value::real(0.880797), p_hi}, {Value::real(0.119203), 1.0 - p_hi}}));
    ValueDist exact = exact_distribution_oracle(Term::sample(branch));
    double exact_mean = 0.0;
    for (std::size_t i = 0; i < exact.size(); ++i)
        exact_mean += exact.value_at(i).as_real() * exact.mass_at(i);
    CHECK(exact_mean == Catch::Approx(0.645817).margin(1e-5));

    Rng rng(17);
    const double mc = predict_prob(f1, Tensor::row({0.0}), 100000, rng);
    const double tv = std::abs(mc - exact_mean);
    CHECK(tv <= 0.02);
}

TEST_CASE("conditional log-likelihood on fixed outputs") {
    Tensor x = Tensor::row({0.3});
    Tensor gamma = Tensor::row({0.0, 0.0});
    Rng rng(19);
    SECTION("coin-flip classifier gives log one half") {
        auto f1 = constant_f1(tiny_base(), {0.0, 0.0}, 0.0);
        CHECK(conditional_loglik(f1, x, 1, gamma, rng) ==
              Catch::Approx(-0.693147181).margin(1e-9));
        CHECK(conditional_loglik(f1, x, 0, gamma, rng) ==
              Catch::Approx(-0.693147181).margin(1e-9));
    }
    SECTION("near-certain output gives log of its probability") {
        const double logit_99 = std::log(0.99 / 0.01);
        auto f1 = constant_f1(tiny_base(), {0.0, logit_99}, 0.0);
        CHECK(conditional_loglik(f1, x, 1, gamma, rng) ==
              Catch::Approx(-0.010050336).margin(1e-9));
    }
}

TEST_CASE("exp of conditional log-likelihood averages to the predictive probability") {
    MlpSpec hs;
    hs.layer_sizes = {1, 3, 2};
    hs.output = OutputLayer::Identity;
    Rng init(43);
    StochasticClassifier f1{tiny_base(), MlpParams::random(hs, init, 1.2), 0.1};
    Tensor x = Tensor::row({0.4});

    Rng rng(23);
    const std::size_t n = 20000;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        Tensor gamma({1});
        gamma[0] = rng.gaussian();
        acc += std::exp(conditional_loglik(f1, x, 1, gamma, rng));
    }
    acc /= static_cast<double>(n);
    Rng rng2(29);
    const double direct = predict_prob(f1, x, n, rng2);
    CHECK(acc == Catch::Approx(direct).margin(0.015));
}

TEST_CASE("conditional log-likelihood gradient survives a finite-difference check") {
    MlpSpec base;
    base.layer_sizes = {2, 3, 1};
    MlpSpec hs;
    hs.layer_sizes = {2, base.param_count()};
    hs.output = OutputLayer::Identity;
    Rng init(47);
    MlpParams hyper = MlpParams::random(hs, init, 1.0);
    const double sigma = 0.1;

    Rng noise_rng(53);
    LatentDraw nd = draw_latent(2, base.param_count(), noise_rng);
    Tensor X({2, 2}, {0.4, -0.3, -1.0, 0.6});
    Tensor targets({2}, {1.0, 0.0});

    struct Built {
        Tape tape;
        Var t1;
        Var loss;
    };
    auto loss_at = [&](const std::vector<double>& theta1) {
        Built b;
        b.t1 = b.tape.input(Tensor({theta1.size()}, theta1));
        Var theta0 = theta0_on_tape(b.tape, hs, b.t1, nd, sigma);
        Var logits = base_logits_on_tape(b.tape, base, theta0, X);
        b.loss = b.tape.mean(b.tape.bce_with_logits(b.tape.flatten(logits), targets));
        return b;
    };

    std::vector<double> theta1 = hyper.flatten();
    Built built = loss_at(theta1);
    built.tape.backward(built.loss);
    const Tensor grad = built.tape.grad(built.t1);

    const double h = 1e-5;
    for (std::size_t i = 0; i < theta1.size(); i += 3) {
        auto hi = theta1, lo = theta1;
        hi[i] += h;
        lo[i] -= h;
        Built bh = loss_at(hi);
        Built bl = loss_at(lo);
        const double fd = (bh.tape.value(bh.loss).scalar_value() -
                           bl.tape.value(bl.loss).scalar_value()) /
                          (2.0 * h);
        INFO("parameter " << i);
        CHECK(grad[i] == Catch::Approx(fd).epsilon(1e-3).margin(1e-8));
    }
}

TEST_CASE("taped realization agrees with the plain sampler") {
    MlpSpec base;
    base.layer_sizes = {2, 3, 1};
    MlpSpec hs;
    hs.layer_sizes = {2, base.param_count()};
    hs.output = OutputLayer::Identity;
    Rng init(59);
    StochasticClassifier f1{base, MlpParams::random(hs, init, 1.0), 0.2};

    Rng noise_rng(61);
    LatentDraw nd = draw_latent(2, base.param_count(), noise_rng);
    DeterministicClassifier f0 = realize(f1, nd.z, nd.eps);

    Tape tape;
    Var t1 = tape.input(Tensor({f1.hyper.param_count()}, f1.hyper.flatten()));
    Var theta0 = theta0_on_tape(tape, hs, t1, nd, f1.sigma);
    const Tensor& flat = tape.value(theta0);
    auto expect = f0.params.flatten();
    REQUIRE(flat.size() == expect.size());
    for (std::size_t i = 0; i < expect.size(); ++i)
        CHECK(flat[i] == Catch::Approx(expect[i]).margin(1e-12));

    Tensor x = Tensor::row({0.3, -0.8});
    Var logits = base_logits_on_tape(tape, base, theta0, Tensor({1, 2}, {0.3, -0.8}));
    CHECK(tape.value(logits)[0] == Catch::Approx(f0.logit(x)).margin(1e-12));
}

TEST_CASE("hyper-level sampling") {
    SECTION("noise-free constant hyper-hypernet fixes the hypernet") {
        MlpSpec base = tiny_base();
        MlpSpec h1;
        h1.layer_sizes = {1, 2};
        h1.output = OutputLayer::Identity;
        MlpSpec h2;
        h2.layer_sizes = {1, h1.param_count()};
        h2.output = OutputLayer::Identity;
        MlpParams hyper2 = MlpParams::zeros(h2);
        for (std::size_t i = 0; i < h1.param_count(); ++i)
            hyper2.biases[0][i] = 0.1 * static_cast<double>(i);
        HyperModel f2{base, h1, hyper2, 0.0, 0.0};
        Rng rng(67);
        auto a = sample_hyper(f2, rng).hyper.flatten();
        auto b = sample_hyper(f2, rng).hyper.flatten();
        CHECK(a == b);
        for (std::size_t i = 0; i < a.size(); ++i)
            CHECK(a[i] == Catch::Approx(0.1 * static_cast<double>(i)).margin(1e-12));
    }
    SECTION("positive hyper noise separates seeds") {
        MlpSpec base = tiny_base();
        Rng init(71);
        HyperModel f2 = HyperModel::init(base, 1, 0.1, init);
        Rng ra(73), rb(79);
        CHECK(sample_hyper(f2, ra).hyper.flatten() != sample_hyper(f2, rb).hyper.flatten());
    }
    SECTION("induced base-weight means match a nested quadrature oracle") {
        MlpSpec base = tiny_base();
        MlpSpec h1;
        h1.layer_sizes = {1, 2};
        h1.output = OutputLayer::Identity;
        MlpSpec h2;
        h2.layer_sizes = {1, 3, h1.param_count()};
        h2.output = OutputLayer::Identity;
        Rng init(83);
        HyperModel f2{base, h1, MlpParams::random(h2, init, 1.2), 0.05, 0.05};

        // With a linear level-1 hypernet the latent integrates out, leaving
        // the bias block of theta1; integrate the level-2 latent by grid.
        std::vector<double> oracle(2, 0.0);
        const double step = 1e-3;
        for (double z = -8.0; z <= 8.0; z += step) {
            Tensor out = mlp_forward(f2.hyper2, Tensor::row({z}));
            const double w = normal_pdf(z) * step;
            oracle[0] += w * out[2];
            oracle[1] += w * out[3];
        }

        Rng rng(89);
        const std::size_t outer = 4000, inner = 64;
        std::vector<std::vector<double>> means;
        for (std::size_t i = 0; i < outer; ++i) {
            StochasticClassifier f1 = sample_hyper(f2, rng);
            std::vector<double> m(2, 0.0);
            for (std::size_t j = 0; j < inner; ++j) {
                auto th = sample_classifier(f1, rng).params.flatten();
                m[0] += th[0];
                m[1] += th[1];
            }
            m[0] /= inner;
            m[1] /= inner;
            means.push_back(std::move(m));
        }
        for (std::size_t c = 0; c < 2; ++c) {
            double mean = 0.0;
            for (const auto& m : means) mean += m[c];
            mean /= static_cast<double>(outer);
            double var = 0.0;
            for (const auto& m : means) var += (m[c] - mean) * (m[c] - mean);
            const double se = std::sqrt(var / static_cast<double>(outer - 1) /
                                        static_cast<double>(outer));
            INFO("coordinate " << c);
            CHECK(std::abs(mean - oracle[c]) <= 3.0 * se);
        }
    }
}

TEST_CASE("feature extraction") {
    SECTION("coin-flip classifier") {
        auto f1 = constant_f1(tiny_base(), {0.0, 0.0}, 0.0);
        Tensor X({3, 1}, {-1.0, 0.0, 2.0});
        std::vector<int> y{0, 1, 1};
        Rng rng(97);
        GFeatureVector g = extract_g_features(f1, X, y, 32, rng);
        CHECK(g.likelihood == Catch::Approx(0.5).margin(1e-9));
        CHECK(g.log_likelihood == Catch::Approx(-0.693147181).margin(1e-9));
        CHECK(g.entropy == Catch::Approx(0.693147181).margin(1e-9));
        CHECK(g.l1 == 0.0);
        CHECK(g.l2 == 0.0);
        CHECK(g.path_norm == 0.0);
    }
    SECTION("four-point fixture against hand-computed values") {
        DeterministicClassifier f0{MlpParams::unflatten(tiny_base(), {1.0, -0.5})};
        Tensor X({4, 1}, {-2.0, -1.0, 1.0, 2.0});
        std::vector<int> y{0, 0, 1, 1};
        GFeatureVector g = extract_g_features(f0, X, y);
        CHECK(g.l1 == Catch::Approx(1.5).margin(1e-12));
        CHECK(g.l2 == Catch::Approx(1.118033989).margin(1e-9));
        CHECK(g.path_norm == Catch::Approx(1.0).margin(1e-12));
        CHECK(g.likelihood == Catch::Approx(0.787455578).margin(1e-8));
        CHECK(g.log_likelihood == Catch::Approx(-0.238948319).margin(1e-8));
        CHECK(g.entropy == Catch::Approx(0.470371408).margin(1e-8));
    }
    SECTION("stochastic extractor at zero noise matches the deterministic one") {
        auto f1 = constant_f1(tiny_base(), {1.0, -0.5}, 0.0);
        DeterministicClassifier f0{MlpParams::unflatten(tiny_base(), {1.0, -0.5})};
        Tensor X({4, 1}, {-2.0, -1.0, 1.0, 2.0});
        std::vector<int> y{0, 0, 1, 1};
        Rng rng(101);
        GFeatureVector a = extract_g_features(f1, X, y, 8, rng);
        GFeatureVector b = extract_g_features(f0, X, y);
        CHECK(a.likelihood == Catch::Approx(b.likelihood).margin(1e-12));
        CHECK(a.entropy == Catch::Approx(b.entropy).margin(1e-12));
        CHECK(a.path_norm == Catch::Approx(b.path_norm).margin(1e-12));
    }
    SECTION("feature row has six entries in declared order") {
        GFeatureVector g{1.0, 2.0, 0.5, -0.7, 0.6, 3.0};
        Tensor r = g.row();
        REQUIRE(r.size() == GFeatureVector::kCount);
        CHECK(r[0] == 1.0);
        CHECK(r[3] == -0.7);
        CHECK(r[5] == 3.0);
    }
}

TEST_CASE("diagonal gaussian kl") {
    MlpSpec base;
    base.layer_sizes = {1, 1};
    SECTION("identical distributions have zero divergence") {
        auto p = GaussianClassifier::standard(base);
        CHECK(gaussian_kl(p, p) == 0.0);
    }
    SECTION("unit variances reduce to half the squared mean shift") {
        MlpSpec wide;
        wide.layer_sizes = {2, 1};
        auto p = GaussianClassifier::standard(wide);
        auto q = GaussianClassifier::standard(wide);
        q.mean = {0.3, -0.4, 1.2};
        CHECK(gaussian_kl(q, p) == Catch::Approx(0.845).margin(1e-12));
    }
    SECTION("one-dimensional variance ratio of two") {
        MlpSpec one;
        one.layer_sizes = {1, 1};
        auto p = GaussianClassifier::standard(one);
        auto q = GaussianClassifier::standard(one);
        // Only one coordinate differs so the remaining term is exercised alone.
        q.std_dev = {1.0 / std::sqrt(2.0), 1.0};
        CHECK(gaussian_kl(q, p) == Catch::Approx(0.096573590).margin(1e-9));
    }
    SECTION("dimension mismatch is rejected") {
        MlpSpec wide;
        wide.layer_sizes = {2, 1};
        CHECK_THROWS_AS(gaussian_kl(GaussianClassifier::standard(base),
                                    GaussianClassifier::standard(wide)),
                        DegenerateInputError);
    }
}

TEST_CASE("model checkpoints round-trip through json") {
    SECTION("stochastic classifier") {
        MlpSpec base;
        base.layer_sizes = {2, 3, 1};
        Rng rng(103);
        StochasticClassifier f1 = StochasticClassifier::init(base, 2, 0.1, rng);
        auto j = model_to_json(f1);
        StochasticClassifier back = f1_from_json(j);
        CHECK(back.sigma == f1.sigma);
        CHECK(back.hyper.flatten() == f1.hyper.flatten());
        CHECK(back.base.layer_sizes == base.layer_sizes);
        CHECK_THROWS_AS(gaussian_from_json(j), ConfigError);
    }
    SECTION("hyper model") {
        MlpSpec base;
        base.layer_sizes = {1, 2, 1};
        Rng rng(107);
        HyperModel f2 = HyperModel::init(base, 1, 0.05, rng);
        auto j = model_to_json(f2);
        HyperModel back = f2_from_json(j);
        CHECK(back.hyper2.flatten() == f2.hyper2.flatten());
        CHECK(back.sigma1 == f2.sigma1);
        CHECK(back.sigma2 == f2.sigma2);
        CHECK(back.hyper1.layer_sizes == f2.hyper1.layer_sizes);
    }
    SECTION("gaussian baseline") {
        MlpSpec base;
        base.layer_sizes = {2, 1};
        auto g = GaussianClassifier::standard(base);
        g.mean[1] = 0.7;
        g.std_dev[2] = 0.3;
        auto j = model_to_json(g);
        auto back = gaussian_from_json(j);
        CHECK(back.mean == g.mean);
        CHECK(back.std_dev == g.std_dev);
    }
}

TEST_CASE("configuration errors are rejected") {
    MlpSpec base = tiny_base();
    SECTION("hypernet output width must match the base parameter count") {
        MlpSpec hs;
        hs.layer_sizes = {2, 3};
        hs.output = OutputLayer::Identity;
        StochasticClassifier f1{base, MlpParams::zeros(hs), 0.1};
        CHECK_THROWS_AS(f1.validate(), ConfigError);
    }
    SECTION("negative noise scale") {
        auto f1 = constant_f1(base, {0.0, 0.0}, 0.0);
        f1.sigma = -0.1;
        CHECK_THROWS_AS(f1.validate(), ConfigError);
    }
    SECTION("gaussian stds must be positive") {
        auto g = GaussianClassifier::standard(base);
        g.std_dev[0] = 0.0;
        CHECK_THROWS_AS(g.validate(), ConfigError);
    }
    SECTION("sigmoid hypernet output is rejected") {
        MlpSpec hs;
        hs.layer_sizes = {2, base.param_count()};
        StochasticClassifier f1{base, MlpParams::zeros(hs), 0.1};
        CHECK_THROWS_AS(f1.validate(), ConfigError);
    }
}
