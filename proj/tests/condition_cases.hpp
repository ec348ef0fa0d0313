// Parameter sets shared by the unit tests and the acceptance binary: one
// feasible set per regime and one infeasible set that breaks exactly one
// named inequality.
#ifndef IPSG_TESTS_CONDITION_CASES_HPP
#define IPSG_TESTS_CONDITION_CASES_HPP

#include <string>
#include <vector>

#include "ipsg/diagnostics.hpp"

namespace cases {

struct ConditionCase {
  ipsg::Regime regime;
  ipsg::ConditionParams feasible;
  ipsg::ConditionParams infeasible;
  std::string violated;
};

inline std::vector<ConditionCase> condition_cases() {
  using ipsg::Regime;
  std::vector<ConditionCase> out;

  ipsg::ConditionParams wcf;
  wcf.alpha = 1.0;
  wcf.beta = 0.5;
  wcf.K = 10000;
  wcf.rho = 1.0;
  wcf.rho_bar = 1.5;
  auto wcf_bad = wcf;
  wcf_bad.beta = 10.0;
  out.push_back({Regime::WeaklyConvexFixed, wcf, wcf_bad, "inertia_bound"});

  ipsg::ConditionParams wcv;
  wcv.alpha = 0.5;
  wcv.beta_cap = 0.5;
  wcv.rho = 1.0;
  wcv.rho_bar = 1.5;
  auto wcv_bad = wcv;
  wcv_bad.alpha = 0.8;
  out.push_back({Regime::WeaklyConvexVarying, wcv, wcv_bad, "step_bound"});

  ipsg::ConditionParams cf = wcf;
  cf.tau = 5;
  auto cf_bad = cf;
  cf_bad.beta = 5.0;
  out.push_back({Regime::CompositeFixed, cf, cf_bad, "gamma_positive"});

  ipsg::ConditionParams cv = wcv;
  cv.a = 4;
  cv.tau = 1;
  auto cv_bad = cv;
  cv_bad.tau = 3;
  out.push_back({Regime::CompositeVarying, cv, cv_bad, "gamma_positive"});

  ipsg::ConditionParams sc;
  sc.alpha = 0.01;
  sc.beta = 0.5;
  sc.K = 1e6;
  sc.rho = 1.0;
  sc.tau = 2;
  auto sc_bad = sc;
  sc_bad.tau = 1e5;
  out.push_back({Regime::SmoothConstant, sc, sc_bad, "tau_condition"});

  ipsg::ConditionParams ss;
  ss.alpha = 1e-4;
  ss.beta = 0.5;
  ss.a = 1000;
  ss.rho = 1.0;
  ss.tau = 400;
  auto ss_bad = ss;
  ss_bad.tau = 600;
  out.push_back({Regime::SmoothShifted, ss, ss_bad, "shift_vs_delay"});
  return out;
}

}  // namespace cases

#endif
