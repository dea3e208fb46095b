#pragma once

#include <string>
#include <vector>

#include "swgs/model.hpp"

namespace fixture {

inline swgs::ScenarioSpec tds1()
{
    swgs::ScenarioSpec s;
    s.C = 4;
    s.T = 5;
    s.alpha = 0.05;
    s.beta = 0.1;
    s.delta = 0.2;
    s.vc = {0.02, 0.51};
    s.analysis_periods = {3, 5};
    s.M_SW = 1400;
    return s;
}

inline swgs::ScenarioSpec tds2()
{
    swgs::ScenarioSpec s;
    s.C = 20;
    s.T = 9;
    s.alpha = 0.05;
    s.beta = 0.2;
    s.delta = 0.24;
    s.vc = {1.0 / 9.0, 1.0};
    s.analysis_periods = {3, 6, 9};
    s.M_SW = 1260;
    return s;
}

inline swgs::ScenarioSpec tiny()
{
    swgs::ScenarioSpec s;
    s.C = 3;
    s.T = 3;
    s.alpha = 0.05;
    s.beta = 0.2;
    s.delta = 1.8;
    s.vc = {0.05, 1.0};
    s.analysis_periods = {2, 3};
    s.M_SW = 36;
    return s;
}

inline swgs::GroupSequentialDesign design(const swgs::ScenarioSpec& s, int m, std::vector<int> S,
                                          std::vector<double> f, std::vector<double> e)
{
    return swgs::GroupSequentialDesign(swgs::AllocationSchedule(std::move(S), s.T), s.schedule(),
                                       swgs::StoppingBoundaries::from_vectors(f, e), m, s.vc);
}

// Reference optimal designs, in the order w = (1/3,1/3,1/3), (1/2,0,1/2), (0,1/2,1/2).
inline std::vector<swgs::GroupSequentialDesign> tds1_designs()
{
    const auto s = tds1();
    return {design(s, 69, {1, 2, 3, 5}, {0.41, 1.66}, {2.27, 1.66}),
            design(s, 70, {1, 2, 3, 5}, {0.68, 1.60}, {2.95, 1.60}),
            design(s, 69, {1, 2, 3, 5}, {-5.05, 1.71}, {2.12, 1.71})};
}

inline std::vector<swgs::GroupSequentialDesign> tds2_designs()
{
    const auto s = tds2();
    return {design(s, 7, {1, 1, 1, 2, 2, 2, 3, 3, 4, 4, 5, 5, 6, 6, 6, 8, 8, 8, 9, 10}, {-0.07, 0.67, 1.65},
                   {2.64, 2.14, 1.65}),
            design(s, 7, {1, 1, 1, 1, 2, 2, 2, 3, 3, 3, 4, 5, 5, 6, 6, 7, 7, 8, 8, 9}, {0.04, 0.77, 1.58},
                   {14.41, 12.93, 1.58}),
            design(s, 7, {1, 1, 1, 1, 2, 2, 2, 3, 3, 3, 4, 5, 5, 6, 6, 7, 8, 8, 9, 9}, {-5.55, -4.33, 1.79},
                   {2.26, 2.05, 1.79})};
}

inline std::string config(const std::string& name) { return std::string(SWGS_CONFIG_DIR) + "/" + name; }

} // namespace fixture
