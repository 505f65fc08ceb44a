// Abrupt coefficient change halfway through the stream. Forgetting nothing
// (mu = 1) keeps fitting the old regime; forgetting everything (mu = 0)
// throws away useful history.
#include <cstdio>
#include <initializer_list>

#include "mores/mores.hpp"

int main() {
    const auto stream = mores::gen_drifting(3, 400, 10, 3, 200, 0.1);
    std::printf("   mu   average MAE\n");
    for (double mu : {0.0, 0.5, 0.8, 0.9, 0.95, 0.99, 1.0}) {
        mores::HyperParams hp;
        hp.mu = mu;
        mores::MoresLearner learner(10, 3, hp);
        const auto report = mores::prequential_run(learner, std::span<const mores::Sample>(stream.samples));
        std::printf("%5.2f   %.4f\n", mu, report.average_mae);
    }
}
