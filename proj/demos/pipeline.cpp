// Lasso selection followed by the partially linear fit on a small high-dimensional problem.
#include <debinet/debinet.hpp>

#include <cstdio>

int main() {
    using namespace debinet;
    Dataset ds = gen_table2(400, 800, 8, 42);

    LassoSelectorConfig sel;
    NnPlmConfig nn = default_nn_config(Scenario::table2_high_low);
    nn.width = 400;

    DebiasResult deb = debinet_fit(ds.X, ds.y, sel, nn);
    DebiasResult ols = ols_post(ds.X, ds.y, deb.active_set);

    std::printf("selected %zu features\n", deb.active_set.size());
    std::printf("%6s %8s %8s %8s %8s\n", "index", "truth", "debinet", "ci_low", "ci_high");
    for (std::size_t a = 0; a < deb.active_set.size(); ++a) {
        Index j = deb.active_set[a];
        std::printf("%6ld %8.3f %8.3f %8.3f %8.3f\n", static_cast<long>(j), (*ds.beta_true)(j), deb.beta_hat(a),
                    deb.ci_low(a), deb.ci_high(a));
    }
    Vec truth = (*ds.beta_true)(deb.active_set);
    std::printf("estimation MSE: debinet %.5f, ols-post %.5f\n", (deb.beta_hat - truth).squaredNorm() / truth.size(),
                (ols.beta_hat - truth).squaredNorm() / truth.size());
    return 0;
}
