#pragma once

#include <string>
#include <vector>

namespace dfbk {

// Named view of one learnable array and its gradient. Collection order is
// the registration order, which is fixed by construction, so checkpoints
// and optimizer state line up across runs.
template <typename T>
struct ParamRef {
    std::string name;
    std::vector<T>* value = nullptr;
    std::vector<T>* grad = nullptr;
};

template <typename T>
using ParamList = std::vector<ParamRef<T>>;

template <typename T>
void zero_grads(const ParamList<T>& params) {
    for (const auto& p : params) std::fill(p.grad->begin(), p.grad->end(), T(0));
}

template <typename T>
size_t param_count(const ParamList<T>& params) {
    size_t n = 0;
    for (const auto& p : params) n += p.value->size();
    return n;
}

}  // namespace dfbk
