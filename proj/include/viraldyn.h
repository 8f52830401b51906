/* Public C interface of the viraldyn within-host dynamics library.
 *
 * All functions return vd_status (VD_OK on success) unless documented
 * otherwise. On failure, vd_last_error() yields a thread-local message
 * describing the problem. Objects returned through out-pointers are owned
 * by the caller and released with the matching *_free function.
 */

#ifndef VIRALDYN_H
#define VIRALDYN_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum vd_status {
  VD_OK = 0,
  VD_EINVAL = 1,   /* invalid argument or precondition violation */
  VD_EDOMAIN = 2,  /* mathematical assumption does not hold */
  VD_ENUMERIC = 3, /* numerical procedure failed */
  VD_EIO = 4,      /* file could not be read or written */
  VD_EPARSE = 5    /* malformed JSON or CSV input */
} vd_status;

/* Opaque handles. */
typedef struct vd_params vd_params;
typedef struct vd_trajectory vd_trajectory;
typedef struct vd_observations vd_observations;
typedef struct vd_fit_result vd_fit_result;

/* Instantaneous compartment values. L is meaningful iff has_L != 0. */
typedef struct vd_state {
  double t, T, I, V, A, L;
  int has_L;
} vd_state;

typedef struct vd_thresholds {
  double r0, v_t, v_is, w, zeta;
  int r0_above_one, assumption1, assumption2;
} vd_thresholds;

/* Equilibrium kinds accepted by vd_equilibrium / vd_classify. */
enum {
  VD_EQ_TRIVIAL = 0,
  VD_EQ_IMMUNOSUPPRESSION = 1,
  VD_EQ_NO_ADE = 2,
  VD_EQ_ADE = 3
};

enum { VD_STABLE = 0, VD_UNSTABLE = 1, VD_MARGINAL = 2 };

typedef struct vd_stability {
  double jacobian[16]; /* row major, variable order (T, I, V, A) */
  double g[5];         /* characteristic quartic g4, g3, g2, g1, g0 */
  double rh_margins[6]; /* g4, g3, g2, g1, g0, hurwitz quantity */
  int rh_pass;
  double eig_re[4], eig_im[4]; /* sorted by real part, then imaginary */
  int classification;          /* VD_STABLE / VD_UNSTABLE / VD_MARGINAL */
} vd_stability;

typedef struct vd_integration_opts {
  double t_start, t_end;
  double rel_tol, abs_tol;
  double max_step;         /* <= 0 means unlimited */
  double dense_output_dt;
  int extinction_enabled;
  double extinction_threshold;
} vd_integration_opts;

typedef struct vd_summary {
  double peak_v, t_peak_v, min_t, t_min_t, target_loss_fraction, peak_a;
  vd_state final_state;
} vd_summary;

/* Thread-local message for the most recent failure in this thread. */
const char* vd_last_error(void);

/* ----- parameters ----- */

/* Baseline calibration; never fails. */
vd_params* vd_params_create(void);
void vd_params_free(vd_params* p);
vd_params* vd_params_clone(const vd_params* p);

/* Names: lambda, mu, beta0, beta1, delta, omega, c, b, a, sigma, eta. */
vd_status vd_params_set(vd_params* p, const char* name, double value);
vd_status vd_params_get(const vd_params* p, const char* name, double* out);
vd_status vd_params_clear_eta(vd_params* p);

/* latent != 0 validates the latent variant. ok reports overall validity,
 * assumption1 reports delta > mu. */
vd_status vd_params_validate(const vd_params* p, int latent, int* ok,
                             int* assumption1);

/* ----- model evaluation ----- */

vd_status vd_beta_effective(const vd_params* p, double A, double* out);
vd_status vd_rhs_basic(const vd_params* p, const vd_state* s, double out[4]);
/* out order: dT, dL, dI, dV, dA. */
vd_status vd_rhs_latent(const vd_params* p, const vd_state* s, double out[5]);

/* ----- equilibria and stability ----- */

vd_status vd_thresholds_compute(const vd_params* p, vd_thresholds* out);
vd_status vd_equilibrium(const vd_params* p, int kind, vd_state* out,
                         double* residual);
vd_status vd_classify(const vd_params* p, int kind, vd_stability* out);

/* ----- integration ----- */

/* Fills opts with the default integration controls. */
void vd_integration_defaults(vd_integration_opts* opts);

vd_status vd_integrate(const vd_params* p, int latent, const vd_state* init,
                       const vd_integration_opts* opts, vd_trajectory** out);
void vd_trajectory_free(vd_trajectory* traj);
size_t vd_trajectory_size(const vd_trajectory* traj);
vd_status vd_trajectory_point(const vd_trajectory* traj, size_t index,
                              vd_state* out);
size_t vd_trajectory_event_count(const vd_trajectory* traj);
vd_status vd_trajectory_event(const vd_trajectory* traj, size_t index,
                              double* t, int* kind);
vd_status vd_trajectory_summary(const vd_trajectory* traj, vd_summary* out);
vd_status vd_trajectory_write_csv(const vd_trajectory* traj, int latent,
                                  const char* path);

/* ----- observations and fitting ----- */

vd_observations* vd_observations_create(double detection_floor);
void vd_observations_free(vd_observations* obs);
vd_status vd_observations_add_v(vd_observations* obs, double t, double v);
vd_status vd_observations_add_a(vd_observations* obs, double t, double a);
/* CSV header must be `t,V` or `t,V,A`. */
vd_status vd_observations_read_csv(const char* path, vd_observations** out);
size_t vd_observations_count_v(const vd_observations* obs);
size_t vd_observations_count_a(const vd_observations* obs);

/* Objective value; T of init is replaced by lambda/mu. */
vd_status vd_loss(const vd_params* p, const vd_state* init,
                  const vd_observations* obs, double a_weight, double* out);

vd_status vd_synthesize(const vd_params* p, const vd_state* init,
                        const double* times, size_t n_times,
                        double noise_sd_log10, uint64_t seed,
                        vd_observations** out);

/* free_names is a comma-separated list (for example "beta0,delta,c,omega");
 * lo/hi are natural-space bounds aligned with that list. */
vd_status vd_fit(const vd_observations* obs, const char* free_names,
                 const double* lo, const double* hi, const vd_params* base,
                 const vd_state* init, double a_weight, int n_starts,
                 int max_evals, uint64_t seed, vd_fit_result** out);
void vd_fit_result_free(vd_fit_result* result);
vd_status vd_fit_result_params(const vd_fit_result* result, vd_params** out);
vd_status vd_fit_result_init(const vd_fit_result* result, vd_state* out);
vd_status vd_fit_result_stats(const vd_fit_result* result, double* loss,
                              long* n_evals, int* converged);

/* ----- command runner ----- */

/* Runs one CLI-level command (simulate, equilibria, stability, fit, sweep)
 * against a JSON config file, writing artifacts into out_dir (pass NULL to
 * use the config's out_dir, default "."). */
vd_status vd_run(const char* command, const char* config_path,
                 const char* out_dir, uint64_t seed);

#ifdef __cplusplus
}
#endif

#endif /* VIRALDYN_H */
