#pragma once

#include <stdexcept>
#include <string>

namespace trce {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidArgument : Error {
    explicit InvalidArgument(const std::string& msg) : Error(msg) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

struct UnknownTokenError : InvalidArgument {
    explicit UnknownTokenError(const std::string& word)
        : InvalidArgument("unknown token: \"" + word + "\""), word(word) {}
    std::string word;
};

struct SingularSystemError : Error {
    SingularSystemError(const std::string& msg, double cond)
        : Error(msg + " (condition estimate " + std::to_string(cond) + ")"),
          condition_estimate(cond) {}
    double condition_estimate;
};

struct TrainingDivergedError : Error {
    TrainingDivergedError(const std::string& msg, long step)
        : Error(msg + " at step " + std::to_string(step)), step(step) {}
    long step;
};

struct CheckpointError : Error {
    enum class Kind { BadMagic, BadVersion, Truncated, ShapeMismatch, MissingTensor, Io };
    CheckpointError(Kind kind, const std::string& msg) : Error(msg), kind(kind) {}
    Kind kind;
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace trce
