#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

namespace bathy::detail {

// Shortest decimal that round-trips a double.
std::string format_double(double value);

std::ifstream open_input(const std::filesystem::path& path, bool binary = false);
std::ofstream open_output(const std::filesystem::path& path, bool binary = false);
void finish_output(std::ofstream& out, const std::filesystem::path& path);

// Little-endian fixed-width encoding for the packed binary formats.
void write_u64(std::ostream& out, std::uint64_t value);
void write_f64(std::ostream& out, double value);
std::uint64_t read_u64(std::istream& in);
double read_f64(std::istream& in);

}  // namespace bathy::detail
