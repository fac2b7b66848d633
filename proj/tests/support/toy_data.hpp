#pragma once

#include <string>

#include "neurorate/dataset.hpp"
#include "neurorate/neuralnet.hpp"

namespace toy {

/// Random maps; each window's rate is 60 Hz plus ten times the mean of the
/// previous window's first band, so a sequence target depends on its last
/// input map.
inline neurorate::SequenceDataset make_dataset(const neurorate::Architecture& arch, std::size_t trials,
                                               std::size_t windows, std::uint64_t seed,
                                               const std::string& participant = "s01") {
    using namespace neurorate;
    SequenceDataset ds(arch.z, arch.grid, arch.bands, Aggregation::Mean);
    Rng rng(seed);
    for (std::size_t t = 0; t < trials; ++t) {
        TrialFeatures f;
        f.participant_id = participant;
        f.trial_id = "v" + std::to_string(t + 1);
        double previous = 0.0;
        for (std::size_t w = 0; w < windows; ++w) {
            TopoMap m(arch.grid, arch.bands);
            double band0 = 0.0;
            for (std::size_t p = 0; p < arch.grid * arch.grid; ++p) {
                for (std::size_t b = 0; b < arch.bands; ++b) {
                    const auto v = static_cast<float>(uniform01(rng));
                    m.data()[p * arch.bands + b] = v;
                    if (b == 0) band0 += v;
                }
            }
            f.rates.push_back({60.0 + 10.0 * previous, Aggregation::Mean});
            previous = band0 / static_cast<double>(arch.grid * arch.grid);
            f.maps.push_back(std::move(m));
        }
        ds.add_trial(f);
    }
    return ds;
}

} // namespace toy
