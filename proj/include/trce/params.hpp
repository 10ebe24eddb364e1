#pragma once

#include <functional>
#include <map>
#include <string>

#include "trce/errors.hpp"
#include "trce/tape.hpp"

namespace trce {

// Binds named checkpoint tensors onto a tape, once per name. Tensors matched
// by the trainable predicate become differentiable leaves; everything else is
// bound as a constant. Without a predicate all tensors are constants
// (inference).
class ParamBinder {
public:
    using Predicate = std::function<bool(const std::string&)>;

    ParamBinder(Tape& tape, const std::map<std::string, Tensor>& tensors,
                Predicate trainable = nullptr)
        : tape_(&tape), tensors_(&tensors), trainable_(std::move(trainable)) {}

    int operator()(const std::string& name) {
        auto it = bound_.find(name);
        if (it != bound_.end()) return it->second;
        auto tv = tensors_->find(name);
        if (tv == tensors_->end())
            throw CheckpointError(CheckpointError::Kind::MissingTensor,
                                  "checkpoint incomplete: missing tensor \"" + name + "\"");
        const bool train = trainable_ && trainable_(name);
        const int id = train ? tape_->leaf(tv->second) : tape_->constant(tv->second);
        bound_.emplace(name, id);
        return id;
    }

    // Gradients of all bound trainable tensors, keyed by name.
    std::map<std::string, Tensor> harvest() const {
        std::map<std::string, Tensor> grads;
        for (const auto& [name, id] : bound_)
            if (tape_->has_grad(id)) grads.emplace(name, tape_->grad(id));
        return grads;
    }

private:
    Tape* tape_;
    const std::map<std::string, Tensor>* tensors_;
    Predicate trainable_;
    std::map<std::string, int> bound_;
};

}  // namespace trce
