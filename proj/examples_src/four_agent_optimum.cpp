// Constrained optimum of the four-agent quad-cos problem, and how far the
// two biased algorithms land from it.
#include <subiqc/subiqc.hpp>

#include <iostream>

int main() {
  using namespace subiqc;
  Matrix ut(2, 4);
  ut << 1, 2, 3, 4,
        1, 1, 2, 2;
  const Subspace sub(ut.transpose());
  Vector a(4), b(4);
  a << 3, 7, 2, 4;
  b << -2, -1, 5, 12;
  const ObjectiveFamily fam = quad_cos_family(a, b);
  const Vector w_opt = solve_opt(fam, sub).omega_opt;
  std::cout << "omega_opt = " << w_opt.transpose() << "\n";

  const GossipMatrix g = synth_gossip(sub, 0.19, 1);
  for (Algorithm alg : kAllAlgorithms) {
    AlgParams prm;
    prm.mu = 0.012;
    prm.svl = SvlParams{0.5, 1.0, 0.5};
    prm.sector = GlobalSector{fam.sector().L(), fam.sector().m()};
    const FixedPoint fp = fixed_point(build(alg, g, sub, prm), fam);
    std::cout << name(alg) << ": ||omega* - omega_opt|| = "
              << (fp.omega_star - w_opt).norm() << "\n";
  }
}
