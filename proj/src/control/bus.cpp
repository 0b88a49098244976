#include "rclab/control/bus.hpp"

#include <algorithm>

namespace rclab::control {

namespace {

std::vector<std::string> split(const std::string& s)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto slash = s.find('/', start);
        out.push_back(s.substr(start, slash - start));
        if (slash == std::string::npos) return out;
        start = slash + 1;
    }
}

}  // namespace

bool topic_matches(const std::string& filter, const std::string& topic)
{
    const auto f = split(filter);
    const auto t = split(topic);
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (f[i] == "#") return i + 1 == f.size();
        if (i >= t.size()) return false;
        if (f[i] != "+" && f[i] != t[i]) return false;
    }
    return f.size() == t.size();
}

std::uint64_t Bus::subscribe(std::string filter, Handler handler)
{
    std::lock_guard lock(mu_);
    const auto id = next_id_++;
    subs_.push_back({id, std::move(filter), std::make_shared<Handler>(std::move(handler))});
    return id;
}

void Bus::unsubscribe(std::uint64_t id)
{
    std::lock_guard lock(mu_);
    std::erase_if(subs_, [id](const Sub& s) { return s.id == id; });
}

std::size_t Bus::publish(const std::string& topic, const nlohmann::json& message)
{
    // Copy matching handlers so they may (un)subscribe or publish re-entrantly.
    std::vector<std::shared_ptr<Handler>> targets;
    {
        std::lock_guard lock(mu_);
        for (const auto& s : subs_) {
            if (topic_matches(s.filter, topic)) targets.push_back(s.handler);
        }
    }
    for (const auto& h : targets) (*h)(topic, message);
    return targets.size();
}

}  // namespace rclab::control
