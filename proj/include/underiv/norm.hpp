// Effect-norm estimates for the stopping criterion.
//
// The estimator of |beta|_2 from purely observational data is external to
// this library; it enters through a pluggable provider. The oracle providers
// read the true norm from the scenario, optionally with a multiplicative
// bias, which is enough to study the stopping criterion's robustness.

#pragma once

#include "underiv/rng.hpp"
#include "underiv/scenario.hpp"
#include "underiv/serialize.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace underiv {

enum class NormProvider { oracle, oracle_noisy, external };

struct NormEstimate {
    double value = 0.0;
    NormProvider provider = NormProvider::oracle;
};

inline NormEstimate oracle_norm(const Scenario& scenario, double relative_bias,
                                std::uint64_t seed) {
    if (std::abs(relative_bias) >= 1.0)
        throw std::invalid_argument("oracle_norm: |relative_bias| must be < 1");
    NormEstimate est;
    const double truth = scenario.beta.norm();
    if (relative_bias == 0.0) {
        est.value = truth;
        est.provider = NormProvider::oracle;
    } else {
        Rng rng(seed, 0xB0ull);
        est.value = truth * (1.0 + rng.uniform(-relative_bias, relative_bias));
        est.provider = NormProvider::oracle_noisy;
    }
    return est;
}

inline NormEstimate external_norm(double value) {
    if (value < 0.0) throw std::invalid_argument("external_norm: value must be nonnegative");
    return NormEstimate{value, NormProvider::external};
}

inline std::string to_string(NormProvider p) {
    switch (p) {
        case NormProvider::oracle: return "oracle";
        case NormProvider::oracle_noisy: return "oracle_noisy";
        case NormProvider::external: return "external";
    }
    return "oracle";
}

inline NormProvider norm_provider_from_string(const std::string& s) {
    if (s == "oracle") return NormProvider::oracle;
    if (s == "oracle_noisy") return NormProvider::oracle_noisy;
    if (s == "external") return NormProvider::external;
    throw std::invalid_argument("unknown norm provider: " + s);
}

// Parsed form of the config key `norm_provider`:
//   oracle | oracle_noisy:<bias> | external:<value>
struct NormProviderSpec {
    NormProvider kind = NormProvider::oracle;
    double param = 0.0;  // bias for oracle_noisy, value for external
};

inline NormProviderSpec parse_norm_provider(const std::string& s) {
    NormProviderSpec spec;
    const auto colon = s.find(':');
    const std::string head = s.substr(0, colon);
    spec.kind = norm_provider_from_string(head);
    if (spec.kind == NormProvider::oracle) {
        if (colon != std::string::npos)
            throw std::invalid_argument("norm_provider: oracle takes no parameter");
        return spec;
    }
    if (colon == std::string::npos)
        throw std::invalid_argument("norm_provider: " + head + " needs a parameter");
    spec.param = std::stod(s.substr(colon + 1));
    return spec;
}

inline NormEstimate make_norm_estimate(const NormProviderSpec& spec, const Scenario& scenario,
                                       std::uint64_t seed) {
    switch (spec.kind) {
        case NormProvider::oracle: return oracle_norm(scenario, 0.0, seed);
        case NormProvider::oracle_noisy: return oracle_norm(scenario, spec.param, seed);
        case NormProvider::external: return external_norm(spec.param);
    }
    return oracle_norm(scenario, 0.0, seed);
}

inline json norm_estimate_to_json(const NormEstimate& est) {
    return json{{"value", est.value}, {"provider", to_string(est.provider)}};
}

inline NormEstimate norm_estimate_from_json(const json& j) {
    return NormEstimate{j.at("value").get<double>(),
                        norm_provider_from_string(j.at("provider").get<std::string>())};
}

} // namespace underiv
