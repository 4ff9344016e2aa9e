#ifndef COLLABSIM_COMMON_HPP
#define COLLABSIM_COMMON_HPP

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace collabsim {

/// Raised when an input violates a documented precondition or invariant.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised for malformed files; the message names the file and line.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& what);

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

// splitmix64 finaliser
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Seed for an independent substream, derived from a root seed and a path of
/// integer keys (group, participant, modality, ...).
std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> keys) noexcept;

inline Rng make_rng(std::uint64_t root, std::initializer_list<std::uint64_t> keys) {
    return Rng(derive_seed(root, keys));
}

/// 17 significant digits, locale independent; round-trips every double.
std::string format_real(double value);

std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::string hex64(std::uint64_t value);

/// Writes to a sibling temporary file and renames it over `path`.
void atomic_write_file(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

}  // namespace collabsim

#endif  // COLLABSIM_COMMON_HPP
