#pragma once

#include <vector>

#include "maskforge/rng.hpp"
#include "maskforge/tensor.hpp"

namespace maskforge {

// One supervised pair: condition y and target x, each (1,1,H,W) in [0,1].
struct TrainingPair {
    Tensor4 condition;
    Tensor4 target;
};

// Stacks single-sample pairs into one batch along n.
inline std::pair<Tensor4, Tensor4> stack_pairs(const std::vector<TrainingPair>& data,
                                               const std::vector<size_t>& indices) {
    contract(!indices.empty(), "stack_pairs: empty index list");
    const Dims d = data[indices[0]].condition.shape;
    Tensor4 cond(Dims{static_cast<int>(indices.size()), d.c, d.h, d.w});
    Tensor4 target(cond.shape);
    for (size_t i = 0; i < indices.size(); ++i) {
        const TrainingPair& p = data[indices[i]];
        contract(p.condition.shape == d && p.target.shape == d,
                 "stack_pairs: inconsistent pair shapes in dataset");
        std::copy(p.condition.data.begin(), p.condition.data.end(),
                  cond.data.begin() + cond.index(static_cast<int>(i), 0, 0, 0));
        std::copy(p.target.data.begin(), p.target.data.end(),
                  target.data.begin() + target.index(static_cast<int>(i), 0, 0, 0));
    }
    return {std::move(cond), std::move(target)};
}

// Epoch-wise seeded shuffle over a fixed dataset, addressed by batch ordinal
// rather than consumed as a stream: batch k always has the same composition
// for a given seed, which is what makes checkpoint resume exact. The final
// short batch of each epoch is dropped.
struct BatchIterator {
    const std::vector<TrainingPair>* data = nullptr;
    int batch_size = 0;
    uint64_t seed = 0;

    BatchIterator(const std::vector<TrainingPair>& d, int bs, uint64_t s)
        : data(&d), batch_size(bs), seed(s) {
        contract(!d.empty(), "batch_iterator: empty dataset");
        contract(bs >= 1, "batch_iterator: batch size must be >= 1");
        contract(static_cast<size_t>(bs) <= d.size(),
                 "batch_iterator: batch size " + std::to_string(bs) + " exceeds dataset size " +
                     std::to_string(d.size()));
    }

    int64_t batches_per_epoch() const {
        return static_cast<int64_t>(data->size()) / batch_size;
    }

    std::vector<size_t> epoch_permutation(int64_t epoch) const {
        std::vector<size_t> perm(data->size());
        for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        Rng rng(Rng::mix(seed, static_cast<uint64_t>(epoch)));
        for (size_t i = perm.size() - 1; i > 0; --i) {
            const size_t j = static_cast<size_t>(rng.next_u64() % (i + 1));
            std::swap(perm[i], perm[j]);
        }
        return perm;
    }

    std::vector<size_t> batch_indices(int64_t ordinal) const {
        contract(ordinal >= 0, "batch_iterator: negative batch ordinal");
        const int64_t per_epoch = batches_per_epoch();
        const int64_t epoch = ordinal / per_epoch;
        const int64_t slot = ordinal % per_epoch;
        const std::vector<size_t> perm = epoch_permutation(epoch);
        std::vector<size_t> out(static_cast<size_t>(batch_size));
        for (int i = 0; i < batch_size; ++i)
            out[static_cast<size_t>(i)] = perm[static_cast<size_t>(slot * batch_size + i)];
        return out;
    }

    std::pair<Tensor4, Tensor4> batch(int64_t ordinal) const {
        return stack_pairs(*data, batch_indices(ordinal));
    }
};

}  // namespace maskforge
