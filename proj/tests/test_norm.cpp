#include <catch2/catch.hpp>

#include "underiv/norm.hpp"

#include <cmath>

using namespace underiv;

namespace {

Scenario with_beta(std::initializer_list<double> vals) {
    Scenario s;
    s.d_x = static_cast<int>(vals.size());
    s.n_iv = 1;
    s.d_id = 1;
    s.beta = Vector(s.d_x);
    int i = 0;
    for (double v : vals) s.beta(i++) = v;
    s.alpha = Matrix::Ones(1, s.d_x);
    s.mixing = Matrix::Zero(s.d_x, s.d_x);
    s.conf_dir = Vector::Zero(s.d_x);
    return s;
}

} // namespace

TEST_CASE("oracle norm is exact without bias") {
    NormEstimate est = oracle_norm(with_beta({3, 4, 0}), 0.0, 123);
    REQUIRE(est.value == Approx(5.0).margin(1e-12));
    REQUIRE(est.provider == NormProvider::oracle);
}

TEST_CASE("noisy oracle stays within the bias interval") {
    Scenario s = with_beta({1, 2, -2});
    const double truth = 3.0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        NormEstimate est = oracle_norm(s, 0.1, seed);
        REQUIRE(est.provider == NormProvider::oracle_noisy);
        REQUIRE(est.value >= 0.9 * truth);
        REQUIRE(est.value <= 1.1 * truth);
    }
}

TEST_CASE("zero beta gives zero estimate regardless of bias") {
    REQUIRE(oracle_norm(with_beta({0, 0}), 0.5, 9).value == 0.0);
}

TEST_CASE("oracle norm validates the bias range") {
    REQUIRE_THROWS_AS(oracle_norm(with_beta({1}), 1.0, 0), std::invalid_argument);
    REQUIRE_THROWS_AS(oracle_norm(with_beta({1}), -1.5, 0), std::invalid_argument);
}

TEST_CASE("external norm wraps values and rejects negatives") {
    NormEstimate est = external_norm(2.5);
    REQUIRE(est.value == 2.5);
    REQUIRE(est.provider == NormProvider::external);
    REQUIRE(external_norm(0.0).value == 0.0);
    REQUIRE_THROWS_AS(external_norm(-0.1), std::invalid_argument);
}

TEST_CASE("provider tag survives serialization") {
    for (auto provider : {NormProvider::oracle, NormProvider::oracle_noisy,
                          NormProvider::external}) {
        NormEstimate est{1.25, provider};
        NormEstimate back = norm_estimate_from_json(json::parse(norm_estimate_to_json(est).dump()));
        REQUIRE(back.value == est.value);
        REQUIRE(back.provider == est.provider);
    }
}

TEST_CASE("norm provider config strings parse") {
    auto plain = parse_norm_provider("oracle");
    REQUIRE(plain.kind == NormProvider::oracle);

    auto noisy = parse_norm_provider("oracle_noisy:0.1");
    REQUIRE(noisy.kind == NormProvider::oracle_noisy);
    REQUIRE(noisy.param == Approx(0.1));

    auto ext = parse_norm_provider("external:2.5");
    REQUIRE(ext.kind == NormProvider::external);
    REQUIRE(ext.param == Approx(2.5));

    REQUIRE_THROWS_AS(parse_norm_provider("oracle:1"), std::invalid_argument);
    REQUIRE_THROWS_AS(parse_norm_provider("external"), std::invalid_argument);
    REQUIRE_THROWS_AS(parse_norm_provider("magic"), std::invalid_argument);

    Scenario s = with_beta({3, 4});
    REQUIRE(make_norm_estimate(ext, s, 0).value == 2.5);
    REQUIRE(make_norm_estimate(plain, s, 0).value == Approx(5.0));
}
