// One point of the step-size trade-off: certified rate and noise
// sensitivity of AugDGM and DAS, next to their simulated counterparts.
#include <subiqc/subiqc.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using namespace subiqc;
  const double mu = argc > 1 ? std::stod(argv[1]) : 0.05;
  const double sigma = argc > 2 ? std::stod(argv[2]) : 0.63;

  Matrix ut(2, 4);
  ut << 1, 2, 3, 4,
        1, 1, 2, 2;
  const Subspace sub(ut.transpose());
  Vector a(4), b(4);
  a << 3, 7, 2, 4;
  b << -2, -1, 5, 12;
  const ObjectiveFamily fam = quad_cos_family(a, b);
  const GossipMatrix g = synth_gossip(sub, sigma, 1);
  const Matrix R = 0.25 * Matrix::Identity(4, 4);

  for (Algorithm alg : {Algorithm::AugDGM, Algorithm::DAS}) {
    AlgParams prm;
    prm.mu = mu;
    const Realization r = build(alg, g, sub, prm);
    const IqcConfig cfg;
    const double rho = certify_rate(r, fam.sector(), cfg).rho;
    const double gamma = certify_sensitivity(r, fam.sector(), cfg, R).gamma;

    const FixedPoint fp = fixed_point(r, fam);
    RunOptions ro;
    ro.T = 4000;
    const double rho_emp = empirical_rate(run(r, fam, fp, ro));
    const auto runs = monte_carlo(r, fam, fp, NoiseModel(R, R, 0), 20000, 10, 1);
    const double gamma_emp = empirical_sensitivity(runs, 5000);
    std::cout << name(alg) << " mu=" << mu << ": rho* " << rho << " (sim "
              << rho_emp << "), gamma <= " << gamma << " (sim " << gamma_emp
              << ")\n";
  }
}
