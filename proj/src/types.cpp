#include "tontine/types.hpp"

#include <cmath>
#include <string>

#include "tontine/errors.hpp"

namespace tontine {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw ValidationError("scenario: " + msg);
}

}  // namespace

void validate_scenario(const Scenario& s) {
    require(std::isfinite(s.w0) && s.w0 > 0.0, "w0 must be positive");
    require(s.horizon_years >= 1, "horizon_years must be at least 1");
    require(std::isfinite(s.q_min) && s.q_min >= 0.0, "q_min must be nonnegative");
    require(std::isfinite(s.q_max) && s.q_max >= s.q_min, "q_max must be at least q_min");
    require(s.fee >= 0.0 && s.fee < 1.0, "fee must lie in [0, 1)");
    require(std::isfinite(s.mu_bc) && s.mu_bc >= 0.0, "mu_bc must be nonnegative");
    require(s.alpha > 0.0 && s.alpha <= 1.0, "alpha must lie in (0, 1]");
    require(std::isfinite(s.epsilon), "epsilon must be finite");
    require(s.asset_count == 2 || s.asset_count == 4, "asset_count must be 2 or 4");
    require(s.bond_leg >= 0 && s.bond_leg < s.asset_count, "bond_leg out of range");
    require(s.age0 > 0, "age0 must be positive");
}

}  // namespace tontine
