#pragma once

#include <stdexcept>
#include <string>

namespace emf {

// Violated precondition / postcondition / format contract.
// CLI maps this (and NaN aborts) to exit code 2.
class ContractViolation : public std::runtime_error {
public:
    explicit ContractViolation(const std::string& what) : std::runtime_error(what) {}
};

// Training aborted mid-run (NaN loss). Carries the diagnostic dump path.
class TrainAbort : public std::runtime_error {
public:
    TrainAbort(const std::string& what, std::string dump_path)
        : std::runtime_error(what), dump(std::move(dump_path)) {}
    std::string dump;
};

[[noreturn]] inline void contract_fail(const std::string& msg) { throw ContractViolation(msg); }

inline void contract(bool ok, const std::string& msg) {
    if (!ok) contract_fail(msg);
}

} // namespace emf
