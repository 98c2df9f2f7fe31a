#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <sstream>

#include "dmflow/clustering.hpp"
#include "dmflow/ego_network.hpp"
#include "dmflow/errors.hpp"
#include "dmflow/ledger.hpp"
#include "dmflow/markets.hpp"
#include "dmflow/migration.hpp"
#include "dmflow/pipeline.hpp"
#include "dmflow/prices.hpp"
#include "dmflow/stats.hpp"
#include "dmflow/synth.hpp"
#include "dmflow/timeseries.hpp"

namespace py = pybind11;
using namespace dmflow;

namespace {

Ledger ledger_from_jsonl(const std::string& text) {
  std::istringstream in(text);
  return Ledger::load(in);
}

std::string ledger_to_jsonl(const Ledger& ledger) {
  std::ostringstream out;
  ledger.serialize(out);
  return out.str();
}

EntityPartition cluster_ledger(const Ledger& ledger, const std::vector<Seed>& seeds,
                               ChangeLinkReport* report) {
  auto base = co_spend_cluster(ledger);
  auto tagged = tag_entities(base, seeds, ledger.addresses());
  return apply_change_links(ledger, tagged, report);
}

py::dict weekly_dict(const ResilienceSeries& s) {
  py::dict d;
  py::list weeks;
  for (std::size_t i = 0; i < s.volume_markets_usd.size(); ++i) {
    weeks.append(format_date(s.volume_markets_usd.week_start(i)));
  }
  d["week_start"] = weeks;
  d["active_markets"] = s.active_markets.values;
  d["volume_markets_usd"] = s.volume_markets_usd.values;
  d["volume_ego_usd"] = s.volume_ego_usd.values;
  d["unique_users"] = s.unique_users.values;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Dark-market transaction-graph analytics: clustering, ego networks, "
            "resilience series and closure-migration analysis.";
  m.attr("__version__") = kToolVersion;
  m.attr("UNITS_PER_COIN") = kUnitsPerCoin;

  py::register_exception<Error>(m, "DmflowError");

  // --- ledger ---------------------------------------------------------------
  py::class_<Ledger>(m, "Ledger")
      .def_static("load_file",
                  [](const std::string& path) { return Ledger::load_file(path); },
                  py::arg("path"))
      .def_static("from_jsonl", &ledger_from_jsonl, py::arg("text"))
      .def("to_jsonl", &ledger_to_jsonl)
      .def("__len__", &Ledger::size)
      .def_property_readonly("address_count",
                             [](const Ledger& l) { return l.addresses().size(); })
      .def("totals", [](const Ledger& l) {
        auto t = l.totals();
        py::dict d;
        d["total_in"] = t.total_in;
        d["total_out"] = t.total_out;
        d["total_fees"] = t.total_fees;
        d["coinbase_issued"] = t.coinbase_issued;
        return d;
      });

  m.def("validate_transaction_line", [](const std::string& line) -> py::object {
    std::istringstream in(line);
    AddressIndex scratch;
    try {
      scan_jsonl(in, scratch, [](const LedgerTx&) {});
      return py::none();
    } catch (const std::exception& e) {
      return py::str(e.what());
    }
  }, "Validates one JSONL record; returns None or the error message.");

  // --- prices ---------------------------------------------------------------
  py::class_<PriceSeries>(m, "PriceSeries")
      .def_static("load_file", &PriceSeries::from_csv_file, py::arg("path"))
      .def("rate_at", &PriceSeries::rate_at, py::arg("timestamp"))
      .def("usd", &PriceSeries::usd, py::arg("amount"), py::arg("timestamp"))
      .def("__len__", &PriceSeries::size);

  m.def("to_usd",
        [](double coins, Timestamp ts, const PriceSeries& p) {
          return to_usd(coins, ts, p);
        },
        py::arg("native_coins"), py::arg("timestamp"), py::arg("prices"));

  // --- clustering -----------------------------------------------------------
  py::class_<EntityPartition>(m, "EntityPartition")
      .def_property_readonly("entity_count", &EntityPartition::entity_count)
      .def_property_readonly("address_count", &EntityPartition::address_count)
      .def("entity_of_address",
           [](const EntityPartition& p, const Ledger& ledger, const std::string& addr) {
             auto id = ledger.addresses().find(addr);
             if (!id) throw UnknownAddress(addr);
             return p.entity_of(*id);
           },
           py::arg("ledger"), py::arg("address"))
      .def("tag_of",
           [](const EntityPartition& p, EntityId e) {
             return py::make_tuple(to_string(p.tag(e).kind), p.tag(e).name);
           },
           py::arg("entity"))
      .def("to_csv", [](const EntityPartition& p, const Ledger& ledger) {
        std::ostringstream out;
        p.to_csv(out, ledger.addresses());
        return out.str();
      });

  m.def("cluster",
        [](const Ledger& ledger, const std::vector<std::pair<std::string, std::string>>&
                                     seed_pairs) {
          std::vector<Seed> seeds;
          for (const auto& [addr, spec] : seed_pairs) {
            auto colon = spec.find(':');
            Seed s;
            s.address = addr;
            s.tag.kind = tag_kind_from_string(spec.substr(0, colon));
            if (colon != std::string::npos) s.tag.name = spec.substr(colon + 1);
            seeds.push_back(std::move(s));
          }
          ChangeLinkReport report;
          auto part = cluster_ledger(ledger, seeds, &report);
          return py::make_tuple(part, report.links_applied, report.conflicts.size());
        },
        py::arg("ledger"), py::arg("seeds") = std::vector<std::pair<std::string, std::string>>{},
        "Co-spend + conservative change clustering; seeds are (address, "
        "'kind:name') pairs. Returns (partition, change_links, conflicts).");

  // --- ego networks ---------------------------------------------------------
  py::class_<EgoNetwork>(m, "EgoNetwork")
      .def_property_readonly("market", [](const EgoNetwork& n) { return n.market; })
      .def_property_readonly("node_count", &EgoNetwork::node_count)
      .def_property_readonly("edge_count",
                             [](const EgoNetwork& n) { return n.edges.size(); })
      .def("totals", [](const EgoNetwork& n) {
        auto t = network_totals(n);
        py::dict d;
        d["sent_usd"] = t.sent_usd;
        d["received_usd"] = t.received_usd;
        d["in_degree"] = t.in_degree;
        d["out_degree"] = t.out_degree;
        return d;
      });

  m.def("build_ego_network",
        [](const std::string& market, const Ledger& ledger, const EntityPartition& p,
           const PriceSeries* prices) {
          return build_ego_network(market, ledger, p, prices);
        },
        py::arg("market"), py::arg("ledger"), py::arg("partition"),
        py::arg("prices") = nullptr);
  m.def("filter_exchanges",
        [](const EgoNetwork& n, const EntityPartition& p) {
          return filter_exchanges(n, p);
        },
        py::arg("network"), py::arg("partition"));

  // --- time series ----------------------------------------------------------
  m.def("ema", [](const std::vector<double>& x, int span) { return ema(x, span); },
        py::arg("series"), py::arg("span"));
  m.def("macd", [](const std::vector<double>& x) {
    auto r = macd(x);
    py::dict d;
    d["macd"] = r.macd_line;
    d["signal"] = r.signal_line;
    d["histogram"] = r.histogram;
    d["short_input"] = r.short_input;
    return d;
  }, py::arg("series"));

  m.def("weekly_series",
        [](const Ledger& ledger, const EntityPartition& p, const PriceSeries* prices,
           const std::string& roster_csv_path) {
          auto roster = roster_from_csv_file(roster_csv_path);
          return weekly_dict(weekly_series(ledger, p, prices, roster));
        },
        py::arg("ledger"), py::arg("partition"), py::arg("prices"),
        py::arg("roster_csv"));

  m.def("recovery_time",
        [](const std::vector<double>& weekly, const std::string& first_week_start,
           const std::string& closure_date) {
          WeeklySeries s{parse_date(first_week_start), weekly};
          auto r = recovery_time(s, parse_date(closure_date));
          py::dict d;
          d["recovered"] = r.recovered;
          d["days"] = r.recovered ? py::cast(r.days) : py::none().cast<py::object>();
          d["baseline"] = r.baseline;
          return d;
        },
        py::arg("weekly_values"), py::arg("first_week_start"), py::arg("closure_date"));

  // --- stats ----------------------------------------------------------------
  m.def("ks_two_sample",
        [](const std::vector<double>& a, const std::vector<double>& b) {
          auto r = ks_two_sample(a, b);
          return py::make_tuple(r.d_statistic, r.p_value, r.n1, r.n2);
        },
        py::arg("sample1"), py::arg("sample2"));
  m.def("quartiles", [](const std::vector<double>& x) {
    auto q = quartiles(x);
    py::dict d;
    d["q1"] = q.q1;
    d["median"] = q.median;
    d["q3"] = q.q3;
    d["whisker_lo"] = q.whisker_lo;
    d["whisker_hi"] = q.whisker_hi;
    return d;
  }, py::arg("sample"));

  // --- migration ------------------------------------------------------------
  m.def("null_model",
        [](const std::vector<std::size_t>& coexisting_counts) {
          std::vector<ClosureEvent> closures(coexisting_counts.size());
          for (std::size_t i = 0; i < coexisting_counts.size(); ++i) {
            closures[i].coexisting.resize(coexisting_counts[i]);
          }
          return null_model(closures);
        },
        py::arg("coexisting_counts"),
        "Uniform-choice rank probabilities P_i from per-closure coexisting "
        "market counts.");

  // --- synthesis and pipeline ------------------------------------------------
  m.def("scenario_names", [] {
    std::vector<std::string> names;
    for (const auto& [name, cfg] : scenario_library()) names.push_back(name);
    return names;
  });
  m.def("scenario_config",
        [](const std::string& name) { return scenario_library().at(name).to_json(); },
        py::arg("name"));
  m.def("generate_files",
        [](const std::string& config_json, const std::string& out_dir) {
          auto cfg = SynthConfig::from_json(config_json);
          auto files = generate_files(cfg, out_dir);
          py::dict d;
          d["ledger"] = files.ledger_path;
          d["prices"] = files.prices_path;
          d["seeds"] = files.seeds_path;
          d["markets"] = files.markets_path;
          d["ground_truth"] = files.ground_truth_path;
          d["transactions"] = files.transactions;
          return d;
        },
        py::arg("config_json"), py::arg("out_dir"));
  m.def("run_pipeline",
        [](const std::string& config_json) {
          auto cfg = PipelineConfig::from_json(config_json);
          Pipeline pipeline(cfg);
          pipeline.run_all();
          return pipeline.artifacts();
        },
        py::arg("config_json"),
        "Runs cluster/ego/metrics/migrate/report; returns {artifact: rows}.");
}
