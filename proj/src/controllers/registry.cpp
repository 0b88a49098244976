#include "rclab/controllers/registry.hpp"

#include <stdexcept>

#include "rclab/controllers/hold_retest.hpp"
#include "rclab/controllers/iterate3.hpp"
#include "rclab/controllers/minstrel.hpp"

namespace rclab::controllers {

std::shared_ptr<RateController> make_controller(const std::string& name, const nlohmann::json& params)
{
    const nlohmann::json p = params.is_null() ? nlohmann::json::object() : params;
    try {
        if (name == "iterate3") {
            IterateParams ip;
            ip.prime_low_ok_streak = p.value("prime_low_ok_streak", false);
            return std::make_shared<Iterate3Controller>(ip);
        }
        if (name == "minstrel") {
            MinstrelParams mp;
            mp.update_interval = p.value("update_interval", mp.update_interval);
            mp.ewma_alpha = p.value("ewma_alpha", mp.ewma_alpha);
            mp.sample_every = p.value("sample_every", mp.sample_every);
            mp.retry_limit = p.value("retry_limit", mp.retry_limit);
            mp.seed = p.value("seed", mp.seed);
            if (mp.update_interval == 0 || mp.sample_every == 0) {
                throw std::invalid_argument("minstrel intervals must be positive");
            }
            return std::make_shared<MinstrelController>(mp);
        }
        if (name == "hold-retest") {
            return std::make_shared<HoldRetestController>(p.value("held", std::uint8_t{4}),
                                                          p.value("retest_mask", std::uint32_t{16383}));
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("bad parameters for " + name + ": " + e.what());
    }
    throw std::invalid_argument("unknown controller: " + name);
}

std::vector<std::string> controller_names() { return {"iterate3", "minstrel", "hold-retest"}; }

}  // namespace rclab::controllers
