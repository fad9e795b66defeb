// Gradient descent on one agent with curvature in [1, 10]: the certified
// rate should match max(|1 - mu m|, |1 - mu L|) = 9/11 at mu = 2/11.
#include <subiqc/subiqc.hpp>

#include <iostream>

int main() {
  using namespace subiqc;
  const Subspace sub = Subspace::full(1);
  const GossipMatrix g(Matrix::Identity(1, 1), sub);
  AlgParams prm;
  prm.mu = 2.0 / 11.0;
  const Realization r = build(Algorithm::DiSPO, g, sub, prm);
  const SectorBounds sec(Vector::Constant(1, 1.0), Vector::Constant(1, 10.0));
  IqcConfig cfg;
  cfg.off_by_one = false;

  const RateResult rate = certify_rate(r, sec, cfg);
  std::cout << "certified rho* = " << rate.rho << " (9/11 = " << 9.0 / 11.0
            << ", " << rate.probes << " probes)\n";
  std::cout << "certificate max eigenvalue " << rate.cert.verify.max_eig
            << ", lambda_min(P) " << rate.cert.verify.min_eig_p << "\n";
  std::cout << io::certificate_json(rate.cert).dump(2) << "\n";
}
