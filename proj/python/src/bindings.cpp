#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "capita/bundle.hpp"
#include "capita/calibration.hpp"
#include "capita/metrics.hpp"
#include "capita/monitoring.hpp"
#include "capita/params_io.hpp"
#include "capita/payment.hpp"
#include "capita/segmentation.hpp"
#include "capita/stewardship.hpp"
#include "capita/synthgen.hpp"

namespace py = pybind11;
using namespace capita;

namespace {

Tier tier_arg(const std::string& s) {
  auto t = parse_tier(s);
  if (!t) throw CapitaError(ErrorKind::InvalidArgument, "unknown tier '" + s + "' (Low, Medium, High)");
  return *t;
}

FitMethod method_arg(const std::string& s) {
  auto m = parse_fit_method(s);
  if (!m) throw CapitaError(ErrorKind::InvalidArgument, "unknown method '" + s + "'");
  return *m;
}

py::dict metrics_row(const FacilityMetrics& m) {
  py::dict d;
  d["facility_id"] = m.facility_id;
  d["annualized_cost"] = m.annualized_cost.rwf();
  d["period_cost"] = m.period_cost.rwf();
  d["months_active"] = m.months_active;
  d["member_count"] = m.member_count;
  d["phc_utilization_rate"] = m.phc_utilization_rate;
  d["hc_utilization_rate_u"] = m.hc_utilization_rate_u;
  d["capture_ratio"] = m.capture_ratio;
  d["inflow"] = m.inflow;
  d["catchment_visits_total"] = m.catchment_visits_total;
  d["catchment_visits_own"] = m.catchment_visits_own;
  d["inflow_visits"] = m.inflow_visits;
  return d;
}

py::list findings_list(const Findings& f) {
  py::list out;
  for (const auto& x : f) out.append(py::make_tuple(x.code, x.record, x.detail));
  return out;
}

}  // namespace

PYBIND11_MODULE(_capita, m) {
  m.doc() = "Capitation payment engine";

  static py::exception<CapitaError> error(m, "CapitaError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const CapitaError& e) {
      const std::string kind(to_string(e.kind()));
      py::object exc = py::reinterpret_borrow<py::object>(error.ptr())(py::str(kind + ": " + e.what()));
      py::setattr(exc, "kind", py::str(kind));
      PyErr_SetObject(error.ptr(), exc.ptr());
    }
  });

  py::class_<DatasetBundle>(m, "Bundle")
      .def_property_readonly("n_facilities", [](const DatasetBundle& b) { return b.facilities.size(); })
      .def_property_readonly("n_members", [](const DatasetBundle& b) { return b.members.size(); })
      .def_property_readonly("n_visits", [](const DatasetBundle& b) { return b.visits.size(); })
      .def_property_readonly("quarantine", [](const DatasetBundle& b) { return findings_list(b.quarantine); })
      .def("same_records", &DatasetBundle::same_records)
      .def("write", [](const DatasetBundle& b, const std::filesystem::path& dir) {
        py::dict hashes;
        for (const auto& e : write_bundle(b, dir)) hashes[py::str(e.file)] = e.sha256;
        return hashes;
      });

  m.def("load_bundle", [](const std::filesystem::path& dir) { return load_bundle(dir); }, py::arg("directory"));

  m.def(
      "synth",
      [](std::uint64_t seed, const std::map<std::string, std::string>& overrides) {
        KeyValues kv = GeneratorSpec{}.to_key_values();
        for (const auto& [k, v] : overrides) kv[k] = v;
        kv["seed"] = std::to_string(seed);
        Generated g = generate(GeneratorSpec::from_key_values(kv));
        return py::make_tuple(std::move(g.bundle), g.truth.to_json());
      },
      py::arg("seed") = 42, py::arg("overrides") = std::map<std::string, std::string>{},
      "Synthetic bundle and its ground truth (JSON text). Spec fields may be overridden as strings.");

  m.def(
      "compute_metrics",
      [](const DatasetBundle& b, const std::string& period) {
        py::list out;
        for (const auto& f : compute_metrics(b, Period::parse(period)).facilities) out.append(metrics_row(f));
        return out;
      },
      py::arg("bundle"), py::arg("period"));

  m.def(
      "segment",
      [](const DatasetBundle& b, const std::string& period) {
        const auto seg = segment(compute_metrics(b, Period::parse(period)).facilities);
        py::dict d;
        py::dict tiers;
        for (const auto& [id, t] : seg.tier) tiers[py::str(id)] = std::string(to_string(t));
        d["tiers"] = tiers;
        d["capture_groups"] = seg.capture_group;
        d["group_median_u"] = seg.group_median_u;
        d["tier_boundaries"] = seg.tier_boundaries;
        return d;
      },
      py::arg("bundle"), py::arg("period"));

  py::class_<CapitationParams>(m, "Params")
      .def(py::init<>())
      .def_readwrite("a_low", &CapitationParams::a_low)
      .def_readwrite("a_med", &CapitationParams::a_med)
      .def_readwrite("a_high", &CapitationParams::a_high)
      .def_readwrite("b", &CapitationParams::b)
      .def_property_readonly("method", [](const CapitationParams& p) { return std::string(to_string(p.method)); })
      .def_property_readonly("r2", [](const CapitationParams& p) { return p.diagnostics.r2; })
      .def("to_json", &params_to_json)
      .def_static("from_json", [](const std::string& s) { return params_from_json(s); })
      .def("__repr__", [](const CapitationParams& p) {
        return "Params(a_low=" + std::to_string(p.a_low) + ", a_med=" + std::to_string(p.a_med) +
               ", a_high=" + std::to_string(p.a_high) + ", b=" + std::to_string(p.b) + ")";
      });

  m.def(
      "calibrate",
      [](const DatasetBundle& b, const std::string& period, const std::string& method, std::uint64_t seed) {
        const Period p = Period::parse(period);
        const auto metrics = compute_metrics(b, p);
        return calibrate(metrics.facilities, segment(metrics.facilities), p, method_arg(method), seed);
      },
      py::arg("bundle"), py::arg("period"), py::arg("method") = "ols", py::arg("seed") = 42);

  m.def(
      "capitation_amount",
      [](const CapitationParams& p, const std::string& tier, double U, double M, double I) {
        return capitation_amount(p, tier_arg(tier), U, M, I).rwf();
      },
      py::arg("params"), py::arg("tier"), py::arg("U"), py::arg("M"), py::arg("I"));

  m.def(
      "quarterly_schedule",
      [](const CapitationParams& p, const DatasetBundle& b, const std::string& fiscal_year) {
        py::list out;
        for (const auto& l : quarterly_schedule(p, b, Period::parse(fiscal_year)).lines) {
          py::dict d;
          d["facility_id"] = l.facility_id;
          d["quarter"] = l.quarter.label();
          d["base_amount"] = l.base_amount.rwf();
          d["tier"] = std::string(to_string(l.inputs.tier));
          d["U"] = l.inputs.U;
          d["M"] = l.inputs.M;
          d["I_q"] = l.inputs.I_q;
          out.append(d);
        }
        return out;
      },
      py::arg("params"), py::arg("bundle"), py::arg("fiscal_year"));

  m.def(
      "bhattacharyya_distance",
      [](const std::vector<double>& a, const std::vector<double>& b, int bins) {
        return bhattacharyya(a, b, bins).distance;
      },
      py::arg("a"), py::arg("b"), py::arg("bins") = 20);

  m.def(
      "iqr_flagged",
      [](const std::vector<double>& reference, double value, double multiplier) {
        return iqr_check(reference, value, multiplier).flagged;
      },
      py::arg("reference"), py::arg("value"), py::arg("multiplier") = 1.5);

  m.def(
      "antibiotic_top_share",
      [](const DatasetBundle& b, std::size_t top) {
        return top_share(antibiotic_shares(pediatric_single_category_cohort(b)).frequency, top);
      },
      py::arg("bundle"), py::arg("top") = 8);
}
