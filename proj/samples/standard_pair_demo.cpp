// Standard pair on a small square: limit energy, recovery sequence, minimized energy.
// usage: standard_pair_demo [L] [delta]
#include <cstdio>
#include <cstdlib>

#include "experiments.hpp"

using namespace glab;

int main(int argc, char** argv) {
    SweepConfig c;
    c.lx = c.ly = argc > 1 ? std::atof(argv[1]) : 4.0;
    c.delta = argc > 2 ? std::atof(argv[2]) : 1.0 / 16;
    c.eps = geometric_eps(0.1, 0.01, 4);
    c.partition.r = c.lx / 8;
    c.gamma.R = c.gamma.H = 4.0;
    c.gamma.deltas = {0.5, 0.25};
    c.minimizer.max_iter = 4000;
    try {
        const SweepContext ctx = make_sweep_context(c);
        const LimitPair pair = make_limit_pair(c, ctx.constants);
        const PhiValue phi = phi_energy(pair, ctx.constants);
        std::printf("sigma_p %.6f  gamma_p %.6f (box R=%g)\n", ctx.constants.sigma_p, ctx.gamma, c.gamma.R);
        std::printf("v* jumps:");
        for (double s : pair.v.jumps) std::printf(" %g", s);
        std::printf("\nPhi = %.5f  (surface %.5f, wall %.5f, line %.5f)\n", phi.total, phi.surface, phi.wall, phi.line);
        const RunRecord r = run_eps_sweep(c, pair, ctx);
        std::printf("%10s %12s %12s %8s\n", "eps", "recovery", "minimized", "min/Phi");
        for (const EpsEntry& e : r.entries)
            std::printf("%10.3g %12.5f %12.5f %8.4f %s\n", e.eps, e.recovery.total, e.minimized.total,
                        e.minimized.total / phi.total, e.status.c_str());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 1;
    }
    return 0;
}
