#ifndef CELF_TIMING_HPP
#define CELF_TIMING_HPP

#include <chrono>
#include <string>
#include <utility>
#include <vector>

namespace celf {

/// Wall-clock seconds per named phase, in the order the phases ran.
struct PhaseTimings
{
    std::vector<std::pair<std::string, double>> phases;

    void add(std::string name, double seconds) { phases.emplace_back(std::move(name), seconds); }

    double total() const
    {
        double t = 0.0;
        for (const auto& [_, s] : phases)
            t += s;
        return t;
    }
};

class Stopwatch
{
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}

    double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

    /// Returns elapsed seconds and restarts.
    double lap()
    {
        const auto now = std::chrono::steady_clock::now();
        const double s = std::chrono::duration<double>(now - start_).count();
        start_ = now;
        return s;
    }

private:
    std::chrono::steady_clock::time_point start_;
};

} // namespace celf

#endif // CELF_TIMING_HPP
