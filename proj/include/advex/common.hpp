#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace advex {

// Every failure the toolkit raises derives from Error so the CLI can map it
// to exit code 2 uniformly.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Malformed text input: CSV cells, model files, configs.
class ParseError : public Error {
public:
    using Error::Error;
};

// Column set or feature count does not match what the consumer expects.
class SchemaError : public Error {
public:
    using Error::Error;
};

// A class has too few samples for a stratified split, or a search domain
// (e.g. benign rows) is empty.
class SplitError : public Error {
public:
    using Error::Error;
};

class TrainError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

// Request exceeds a hard implementation bound (e.g. brute-force coalition
// enumeration past 15 features).
class CapacityError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class ModelVersionError : public ParseError {
public:
    using ParseError::ParseError;
};

class PcapFormatError : public Error {
public:
    using Error::Error;
};

class PcapTruncationError : public PcapFormatError {
public:
    using PcapFormatError::PcapFormatError;
};

// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);

// Whole-string numeric parsing; throws ParseError with `what` as context.
double parse_double(std::string_view s, std::string_view what);
long long parse_int(std::string_view s, std::string_view what);

std::vector<std::string> split(std::string_view s, char delim);
std::string_view trim(std::string_view s);

// FNV-1a 64-bit; used to fingerprint run artifacts in manifests.
std::uint64_t fnv1a64(std::string_view bytes);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);

// Worker count: ADVEX_THREADS when set, hardware concurrency otherwise.
int thread_count();

// Splits [0, n) into contiguous chunks and runs them on `threads` workers.
// threads <= 0 means thread_count().
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t, std::size_t)>& run_chunk);

}  // namespace advex
