#include <string>

#include "horde/environments.hpp"
#include "horde/error.hpp"
#include "horde/io.hpp"

namespace horde {

namespace {

constexpr std::string_view magic_line = "# horde-log v1";

}  // namespace

LogWriter::LogWriter(const std::filesystem::path& path, std::size_t sensor_count, const ActionSet& actions)
    : out_(path, std::ios::trunc), sensors_(sensor_count) {
  if (!out_) throw InputError("cannot open log for writing: " + path.string());
  out_ << magic_line << '\n' << "# sensors=" << sensor_count << " actions=";
  for (std::size_t a = 0; a < actions.size(); ++a) out_ << (a ? "," : "") << actions.name(a);
  out_ << '\n' << "step,action,behaviour_prob";
  for (std::size_t s = 0; s < sensor_count; ++s) out_ << ",s" << s;
  out_ << '\n';
}

void LogWriter::write(const LogRow& row) {
  if (row.observation.size() != sensors_) throw ConfigError("log row has the wrong number of sensors");
  buf_.clear();
  buf_ += std::to_string(row.step);
  buf_ += ',';
  buf_ += std::to_string(row.action);
  buf_ += ',';
  io::append_double(buf_, row.behaviour_prob);
  for (double x : row.observation) {
    buf_ += ',';
    io::append_double(buf_, x);
  }
  buf_ += '\n';
  out_ << buf_;
}

LogReplay::LogReplay(const std::filesystem::path& path) : in_(path) {
  if (!in_) throw InputError("cannot open log: " + path.string());
  read_header();
}

void LogReplay::read_header() {
  std::string line;
  while (!header_done_ && std::getline(in_, line)) {
    ++line_;
    const auto text = io::trim(line);
    if (line_ == 1) {
      if (text != magic_line) throw ParseError("missing '# horde-log v1' header", line_);
      continue;
    }
    if (line_ == 2) {
      // # sensors=<k> actions=<a>,<b>,...
      const auto parts = io::split(text, ' ');
      if (parts.size() != 3 || parts[0] != "#" || !parts[1].starts_with("sensors=") ||
          !parts[2].starts_with("actions=")) {
        throw ParseError("malformed log descriptor line", line_);
      }
      const auto k = io::parse_int(parts[1].substr(8));
      if (!k || *k <= 0) throw ParseError("bad sensor count", line_);
      sensors_ = static_cast<std::size_t>(*k);
      std::vector<std::string> names;
      for (auto n : io::split(parts[2].substr(8), ',')) names.emplace_back(n);
      try {
        actions_ = ActionSet(std::move(names));
      } catch (const ConfigError& e) {
        throw ParseError(e.what(), line_);
      }
      continue;
    }
    if (!text.starts_with("step,")) throw ParseError("missing column header", line_);
    header_done_ = true;
  }
  if (line_ > 0 && !header_done_) throw ParseError("truncated log header", line_);
}

std::optional<LogRow> LogReplay::next() {
  if (!header_done_) return std::nullopt;
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    const auto text = io::trim(line);
    if (text.empty()) continue;

    const auto fields = io::split(text, ',');
    if (fields.size() != 3 + sensors_) {
      throw ParseError("expected " + std::to_string(3 + sensors_) + " fields, got " + std::to_string(fields.size()),
                       line_);
    }
    LogRow row;
    const auto step = io::parse_int(fields[0]);
    const auto action = io::parse_int(fields[1]);
    const auto prob = io::parse_double(fields[2]);
    if (!step || *step < 0) throw ParseError("bad step field", line_);
    if (!action || *action < -1 || *action >= static_cast<long long>(actions_.size())) {
      throw ParseError("bad action field", line_);
    }
    if (!prob || *prob < 0.0 || *prob > 1.0) throw ParseError("bad behaviour_prob field", line_);
    row.step = static_cast<std::uint64_t>(*step);
    if (last_step_ && row.step <= *last_step_) throw ParseError("steps must increase", line_);
    last_step_ = row.step;
    row.action = static_cast<long>(*action);
    row.behaviour_prob = *prob;
    row.observation.reserve(sensors_);
    for (std::size_t s = 0; s < sensors_; ++s) {
      const auto v = io::parse_double(fields[3 + s]);
      if (!v) throw ParseError("bad observation value in column " + std::to_string(3 + s), line_);
      row.observation.push_back(*v);
    }
    return row;
  }
  return std::nullopt;
}

}  // namespace horde
