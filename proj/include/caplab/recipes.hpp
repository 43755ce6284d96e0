#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "caplab/io.hpp"

namespace caplab {

struct CaseCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct CaseResult {
    std::string name;
    std::vector<CaseCheck> checks;
    io::ReportBundle bundle;
    double seconds = 0;

    bool passed() const {
        for (const auto& c : checks)
            if (!c.passed) return false;
        return !checks.empty();
    }
};

struct RecipeOptions {
    unsigned jobs = 1;
    std::uint64_t seed = 0;
};

/// weighted-line-degenerate, ball-comparability, four-way-equivalence, annuli-trend.
const std::vector<std::string>& case_names();

/// Runs a pinned recipe; unknown names raise ErrorKind::invalid_parameter.
CaseResult reproduce(const std::string& name, const RecipeOptions& options = {});

CaseResult weighted_line_degenerate(const RecipeOptions& options = {});
CaseResult ball_comparability(const RecipeOptions& options = {});
CaseResult four_way_equivalence(const RecipeOptions& options = {});
CaseResult annuli_trend(const RecipeOptions& options = {});

/// Runs every module invariant on one space; a failed check names the invariant.
CaseResult verify_suite(const Space& space, const RecipeOptions& options = {});

}  // namespace caplab
