#include "fedelm/merge.hpp"

namespace fedelm {

Intermediates zero_intermediates(const Topology& topology) {
    validate_topology(topology);
    Intermediates ir;
    ir.topology = topology;
    ir.u = Matrix(topology.n_hidden, topology.n_hidden);
    ir.v = Matrix(topology.n_hidden, topology.n_output);
    return ir;
}

Intermediates extract(const SlfnModel& model) {
    if (!model.p) {
        throw std::logic_error("extract requires sequential state (P is absent)");
    }
    Intermediates ir;
    ir.topology = model.topology;
    ir.u = inverse_spd(*model.p);
    ir.v = matmul(ir.u, model.beta);
    ir.sample_count = model.trained_rows;
    ir.accumulated_ridge = model.accumulated_ridge;
    return ir;
}

static void check_compatible(const Intermediates& a, const Intermediates& b, const char* op) {
    if (a.topology.init_seed != b.topology.init_seed) {
        throw IncompatibilityError(std::string(op) + ": init seeds differ (" +
                                   std::to_string(a.topology.init_seed) + " vs " +
                                   std::to_string(b.topology.init_seed) +
                                   "); merged models require shared alpha and bias");
    }
    if (!(a.topology == b.topology)) {
        throw IncompatibilityError(std::string(op) + ": topologies differ");
    }
}

Intermediates combine(const Intermediates& a, const Intermediates& b) {
    check_compatible(a, b, "combine");
    Intermediates out;
    out.topology = a.topology;
    out.u = add(a.u, b.u);
    out.v = add(a.v, b.v);
    out.sample_count = a.sample_count + b.sample_count;
    out.accumulated_ridge = a.accumulated_ridge + b.accumulated_ridge;
    return out;
}

Intermediates subtract(const Intermediates& a, const Intermediates& b) {
    check_compatible(a, b, "subtract");
    if (a.sample_count < b.sample_count) {
        throw IncompatibilityError("subtract: removing more samples (" +
                                   std::to_string(b.sample_count) + ") than present (" +
                                   std::to_string(a.sample_count) + ")");
    }
    Intermediates out;
    out.topology = a.topology;
    out.u = sub(a.u, b.u);
    out.v = sub(a.v, b.v);
    out.sample_count = a.sample_count - b.sample_count;
    out.accumulated_ridge = a.accumulated_ridge - b.accumulated_ridge;
    return out;
}

SlfnModel rebuild(const Intermediates& ir, double ridge) {
    SlfnModel model = init_model(ir.topology);
    try {
        model.p = inverse_spd(ir.u, ridge);
        model.beta = spd_solve(ir.u, ir.v, ridge);
    } catch (const SingularityError& e) {
        throw SingularityError(e.pivot_index, e.pivot_value,
            "merged U is singular (pivot " + std::to_string(e.pivot_value) + " at index " +
            std::to_string(e.pivot_index) + "); rebuild with a ridge > 0");
    }
    model.trained_rows = ir.sample_count;
    model.accumulated_ridge = ir.accumulated_ridge + ridge;
    return model;
}

}  // namespace fedelm
