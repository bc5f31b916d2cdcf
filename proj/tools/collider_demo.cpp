#include "collider_demo.hpp"

namespace ust::cli {

DiscreteScm collider_demo_scm() {
    auto dag = Dag::from_edges({"Race", "Salary", "Suburb"}, {{"Race", "Suburb"}, {"Salary", "Suburb"}});
    // P(Suburb = 1 | Race, Salary), rows (0,0) (0,1) (1,0) (1,1). With
    // P(Salary = 1) = 0.3 both races have P(Suburb = 1) = 0.41.
    const double suburb[2][2] = {{0.5, 0.2}, {0.2, 0.9}};
    std::vector<std::vector<std::vector<double>>> cpts(3);
    cpts[0] = {{0.6, 0.4}};
    cpts[1] = {{0.7, 0.3}};
    const auto& pa = dag.parents_of(2);
    const bool race_first = dag.name(pa[0]) == "Race";
    for (int p0 = 0; p0 < 2; ++p0) {
        for (int p1 = 0; p1 < 2; ++p1) {
            const double q = race_first ? suburb[p0][p1] : suburb[p1][p0];
            cpts[2].push_back({1.0 - q, q});
        }
    }
    return DiscreteScm(std::move(dag), {2, 2, 2}, std::move(cpts));
}

std::shared_ptr<const LookupModel> collider_demo_model(const DiscreteScm& scm) {
    std::map<std::vector<double>, double> table;
    for (int race = 0; race < 2; ++race) {
        for (int suburb = 0; suburb < 2; ++suburb) {
            table[{double(race), double(suburb)}] =
                exact_probability(scm, "Salary", 1, {{"Race", race}, {"Suburb", suburb}});
        }
    }
    std::vector<FeatureSpec> features{{"Race", AttributeKind::binary, 2}, {"Suburb", AttributeKind::binary, 2}};
    return std::make_shared<LookupModel>(std::move(features), std::move(table));
}

EmpiricalJointDistribution collider_demo_distribution(const DiscreteScm& scm) {
    const double p1 = exact_probability(scm, "Suburb", 1, {});
    return EmpiricalJointDistribution({"Suburb"}, {}, {{{0.0}, 1.0 - p1}, {{1.0}, p1}});
}

Dataset collider_demo_data(const DiscreteScm& scm, std::size_t n, std::uint64_t seed) {
    return scm_sample(scm, n, seed, kColliderDemoRoles);
}

}  // namespace ust::cli
