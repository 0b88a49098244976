#include "rclab/control/undo.hpp"

#include <algorithm>

namespace rclab::control {

void UndoLog::record(std::string key, std::optional<std::string> prior)
{
    entries_.push_back({std::move(key), std::move(prior)});
}

std::size_t UndoLog::persist(const std::string& key)
{
    const auto n = std::erase_if(entries_, [&](const Entry& e) { return e.key == key; });
    persisted_ += n;
    return n;
}

std::optional<std::optional<std::string>> UndoLog::revert(const std::string& key)
{
    const auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.key == key; });
    if (it == entries_.end()) return std::nullopt;
    auto first = it->prior;
    std::erase_if(entries_, [&](const Entry& e) { return e.key == key; });
    return first;
}

std::vector<UndoLog::Entry> UndoLog::take_for_teardown()
{
    std::vector<Entry> out(entries_.rbegin(), entries_.rend());
    entries_.clear();
    persisted_ = 0;
    ++session_id_;
    return out;
}

}  // namespace rclab::control
