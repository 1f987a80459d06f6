#include <catch2/catch_amalgamated.hpp>
#include "sustat/sustat.hpp"

TEST_CASE("smoke: headers compile and basic calls work") {
    auto m = sustat::DistributionModel::chi2(1.51, 2.19);
    REQUIRE(m.mean() == Catch::Approx(2.19));
}
