#ifndef CELF_ERROR_HPP
#define CELF_ERROR_HPP

#include <stdexcept>
#include <string>

namespace celf {

/// Raised for every recoverable failure in the library. `stage()` names the
/// pipeline step that failed ("load", "fit", "train", ...), which the CLI
/// reports alongside the message.
class Error : public std::runtime_error
{
public:
    Error(std::string stage, const std::string& what)
        : std::runtime_error(what), stage_(std::move(stage))
    {
    }

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

} // namespace celf

#endif // CELF_ERROR_HPP
