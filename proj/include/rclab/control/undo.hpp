#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rclab::control {

/// Ordered record of configuration changes made during one session. Each
/// entry holds the value a key had before the change (nullopt: key absent).
class UndoLog {
public:
    struct Entry {
        std::string key;
        std::optional<std::string> prior;
    };

    explicit UndoLog(std::uint64_t session_id = 1) : session_id_(session_id) {}

    void record(std::string key, std::optional<std::string> prior);

    /// Drops the key's entries so teardown keeps its current value. Returns
    /// the number of entries dropped. Later changes are tracked again.
    std::size_t persist(const std::string& key);

    /// Removes the key's entries and returns the value it had before its
    /// first change this session; empty if the key was not changed.
    std::optional<std::optional<std::string>> revert(const std::string& key);

    /// Entries in replay (reverse) order; clears the log and opens a new
    /// session.
    std::vector<Entry> take_for_teardown();

    const std::vector<Entry>& entries() const { return entries_; }
    std::uint64_t session_id() const { return session_id_; }
    std::size_t persisted_count() const { return persisted_; }

private:
    std::vector<Entry> entries_;
    std::uint64_t session_id_;
    std::size_t persisted_ = 0;
};

}  // namespace rclab::control
