#pragma once

#include <stdexcept>
#include <string>

namespace huda {

/// Base class for all library errors.
class HudaError : public std::runtime_error {
public:
    explicit HudaError(const std::string& what) : std::runtime_error(what) {}
};

class DimensionMismatch : public HudaError {
public:
    explicit DimensionMismatch(const std::string& what) : HudaError(what) {}
};

class NoEventFlagged : public HudaError {
public:
    explicit NoEventFlagged(const std::string& what) : HudaError(what) {}
};

class UnbalancedSystem : public HudaError {
public:
    explicit UnbalancedSystem(const std::string& what) : HudaError(what) {}
};

class LoopyTopology : public HudaError {
public:
    explicit LoopyTopology(const std::string& what) : HudaError(what) {}
};

class NoSolution : public HudaError {
public:
    NoSolution(const std::string& what, double residual_norm)
        : HudaError(what), residual(residual_norm) {}
    double residual;
};

class NoConvergence : public HudaError {
public:
    NoConvergence(const std::string& what, double residual_norm)
        : HudaError(what), residual(residual_norm) {}
    double residual;
};

class StepSizeUnderflow : public HudaError {
public:
    explicit StepSizeUnderflow(const std::string& what) : HudaError(what) {}
};

class EventCascadeLimit : public HudaError {
public:
    explicit EventCascadeLimit(const std::string& what) : HudaError(what) {}
};

class NoCrossing : public HudaError {
public:
    explicit NoCrossing(const std::string& what) : HudaError(what) {}
};

class EmptyHorizon : public HudaError {
public:
    explicit EmptyHorizon(const std::string& what) : HudaError(what) {}
};

class NonFiniteGradient : public HudaError {
public:
    NonFiniteGradient(const std::string& what, long index)
        : HudaError(what), param_index(index) {}
    long param_index;
};

class UnknownScenario : public HudaError {
public:
    explicit UnknownScenario(const std::string& what) : HudaError(what) {}
};

class UnknownKind : public HudaError {
public:
    explicit UnknownKind(const std::string& what) : HudaError(what) {}
};

class IoError : public HudaError {
public:
    explicit IoError(const std::string& what) : HudaError(what) {}
};

} // namespace huda
