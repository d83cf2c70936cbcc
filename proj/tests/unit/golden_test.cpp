// Byte-stable pipeline traces over the toy corpus. Set FACTCHECK_UPDATE_GOLDENS=1 to rewrite
// the checked-in files after an intentional behaviour change.
#include <cstdlib>

#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace factcheck;
using namespace testsupport;

namespace {

bool updating() {
    const char* v = std::getenv("FACTCHECK_UPDATE_GOLDENS");
    return v && std::string(v) == "1";
}

class GoldenTrace : public ::testing::TestWithParam<Scenario> {};

TEST_P(GoldenTrace, MatchesCheckedInFile) {
    auto env = ToyEnv::create();
    auto text = golden_text(run_scenario(GetParam(), *env));
    auto path = golden_path(GetParam().name);
    if (updating()) {
        write_file(path, text);
        GTEST_SKIP() << "rewrote " << path;
    }
    ASSERT_TRUE(std::filesystem::exists(path)) << path << " missing; run with FACTCHECK_UPDATE_GOLDENS=1";
    EXPECT_EQ(read_file(path), text) << "trace drifted from " << path;
}

TEST_P(GoldenTrace, RepeatedRunsAreIdentical) {
    auto env = ToyEnv::create();
    EXPECT_EQ(golden_text(run_scenario(GetParam(), *env)), golden_text(run_scenario(GetParam(), *env)));
}

INSTANTIATE_TEST_SUITE_P(Toy, GoldenTrace, ::testing::ValuesIn(golden_scenarios()),
                         [](const auto& info) { return info.param.name; });

}  // namespace
