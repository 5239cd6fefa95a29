#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace paircorr {

enum class Field : std::uint8_t { Field1 = 0, Field2 = 1 };
enum class Arm : std::uint8_t { A = 0, B = 1 };

//! One of the four detectors: 1A, 1B, 2A, 2B.
struct DetectorChannel {
    Field field = Field::Field1;
    Arm arm = Arm::A;

    friend constexpr bool operator==(DetectorChannel, DetectorChannel) = default;
};

// "1A", "1B", "2A", "2B"
std::string_view to_string(DetectorChannel ch);
// Throws ParseError("unknown channel ...") for anything else.
DetectorChannel parse_channel(std::string_view token);

//! Times are stored in integer picoseconds relative to the channel's window start.
using TimePs = std::int64_t;

// Rounds to the nearest picosecond.
TimePs ps_from_ns(double ns);
constexpr double ns_from_ps(TimePs ps) { return static_cast<double>(ps) * 1e-3; }

struct DetectionEvent {
    std::uint64_t trial = 0;
    DetectorChannel channel;
    TimePs time_ps = 0;  // relative to the window start of channel.field

    double time_ns() const { return ns_from_ps(time_ps); }

    friend bool operator==(DetectionEvent const&, DetectionEvent const&) = default;
};

// Canonical record order: (trial, field, time, arm).
bool event_less(DetectionEvent const& a, DetectionEvent const& b);

struct TrialSchedule {
    double delta_t_ns = 50.0;
    double write_duration_ns = 150.0;
    double read_duration_ns = 120.0;
    double window_ns = 200.0;
    std::uint64_t trial_count = 0;

    // Field 1 detectors open at 0, field 2 detectors open at delta_t.
    double window_start_ns(Field f) const { return f == Field::Field1 ? 0.0 : delta_t_ns; }

    // Throws std::invalid_argument naming the offending field.
    void validate() const;

    friend bool operator==(TrialSchedule const&, TrialSchedule const&) = default;
};

class ParseError : public std::runtime_error {
  public:
    ParseError(std::size_t line, std::string const& what);
    std::size_t line() const { return line_; }

  private:
    std::size_t line_;
};

class ValidationError : public std::runtime_error {
  public:
    ValidationError(std::string const& what, std::vector<DetectionEvent> offending);
    std::vector<DetectionEvent> const& offending() const { return offending_; }

  private:
    std::vector<DetectionEvent> offending_;
};

class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/*!
 * Time-stamped detection events for a run of trials.
 *
 * Events are kept in canonical order and every event lies inside its
 * channel's detection window, [0, window_ns) relative to the window start.
 * Field-2 times are window-relative; add schedule.delta_t_ns to put them on
 * the common axis whose origin is the start of the write pulse.
 */
class EventRecord {
  public:
    using Metadata = std::map<std::string, std::string>;

    EventRecord() = default;

    // Sorts events and validates them against the schedule.
    // Throws ValidationError listing events outside their window or trial range.
    EventRecord(TrialSchedule schedule, Metadata metadata, std::vector<DetectionEvent> events);

    TrialSchedule const& schedule() const { return schedule_; }
    Metadata const& metadata() const { return metadata_; }
    std::span<DetectionEvent const> events() const { return events_; }
    std::uint64_t trial_count() const { return schedule_.trial_count; }

    friend bool operator==(EventRecord const&, EventRecord const&) = default;

  private:
    TrialSchedule schedule_;
    Metadata metadata_;
    std::vector<DetectionEvent> events_;
};

struct LoadedRecord {
    EventRecord record;
    bool resorted = false;  // events were not in canonical order on disk
};

void write_record(EventRecord const& record, std::ostream& os);
void write_record_file(EventRecord const& record, std::string const& path);

LoadedRecord read_record(std::istream& is);
LoadedRecord read_record_file(std::string const& path);

// Metadata keys reserved for the header.
bool is_reserved_header_key(std::string_view key);

}  // namespace paircorr
