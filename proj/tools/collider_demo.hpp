#ifndef UST_TOOLS_COLLIDER_DEMO_HPP
#define UST_TOOLS_COLLIDER_DEMO_HPP

#include <cstdint>
#include <memory>

#include "ust/classifiers.hpp"
#include "ust/scm.hpp"

namespace ust::cli {

// Race (0 white, 1 other) and Salary (1 high) are independent roots; Suburb
// is their common child. P(Suburb | Race) does not depend on Race, so
// averaging over P(Suburb) gives back P(Salary | Race) = P(Salary).
DiscreteScm collider_demo_scm();

inline const AuditRoles kColliderDemoRoles{"Race", "Salary"};

/// P(Salary = 1 | Race, Suburb), computed exactly from the model.
std::shared_ptr<const LookupModel> collider_demo_model(const DiscreteScm& scm);

/// Exact P(Suburb).
EmpiricalJointDistribution collider_demo_distribution(const DiscreteScm& scm);

Dataset collider_demo_data(const DiscreteScm& scm, std::size_t n, std::uint64_t seed);

}  // namespace ust::cli

#endif  // UST_TOOLS_COLLIDER_DEMO_HPP
