#include "tae/grad_check.hpp"

#include <cmath>
#include <sstream>

namespace tae {

namespace {
double eval_at(const GradFn& f, const std::vector<Tensor>& params) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const Tensor& p : params) vars.push_back(tape.input(p));
  Var out = f(tape, vars);
  const Tensor& v = tape.value(out);
  if (!v.is_scalar()) throw std::invalid_argument("grad_check: f must return a scalar");
  return v.data[0];
}
}  // namespace

GradCheckReport grad_check(const GradFn& f, const std::vector<Tensor>& params, double tol,
                           double step) {
  // Analytic pass.
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const Tensor& p : params) vars.push_back(tape.input(p));
  Var out = f(tape, vars);
  tape.backward(out);

  GradCheckReport report;
  report.tol = tol;

  std::vector<Tensor> work = params;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    const Tensor& analytic = tape.grad(vars[pi]);
    for (std::size_t i = 0; i < work[pi].size(); ++i) {
      double orig = work[pi].data[i];
      work[pi].data[i] = orig + step;
      double fp = eval_at(f, work);
      work[pi].data[i] = orig - step;
      double fm = eval_at(f, work);
      work[pi].data[i] = orig;

      double numeric = (fp - fm) / (2.0 * step);
      double a = analytic.data[i];
      double rel = std::fabs(a - numeric) / std::max(std::fabs(a) + std::fabs(numeric), 1e-6);
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        std::ostringstream os;
        os << "param " << pi << " entry " << i << " analytic " << a << " numeric " << numeric;
        report.worst = os.str();
      }
    }
  }
  report.pass = report.max_rel_error <= tol;
  return report;
}

}  // namespace tae
