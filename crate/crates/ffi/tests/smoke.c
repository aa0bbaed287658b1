#include <math.h>
#include <stdio.h>
#include <string.h>

#include "gola.h"

static double bump(const double *z, size_t dim, void *user) {
    (void)user;
    double q = 0.0;
    for (size_t i = 0; i < dim; ++i) q += (z[i] - 0.5) * (z[i] - 0.5);
    return -0.5 * q / 0.04;
}

#define CHECK(expr)                                                              \
    do {                                                                         \
        GolaStatus s_ = (expr);                                                  \
        if (s_ != GOLA_STATUS_OK) {                                              \
            fprintf(stderr, "%s -> %d: %s\n", #expr, (int)s_, gola_last_error_message()); \
            return 1;                                                            \
        }                                                                        \
    } while (0)

int main(void) {
    double lo[2] = {-2.0, -2.0}, hi[2] = {2.0, 2.0};
    GolaReport *report = NULL;
    CHECK(gola_run(bump, NULL, 2, lo, hi, "{\"n_starts\": 8}", &report));
    double log_z = 0.0;
    CHECK(gola_report_log_evidence(report, &log_z));
    double exact = log(2.0 * M_PI * 0.04);
    if (fabs(log_z - exact) > 1e-2) {
        fprintf(stderr, "log evidence %g, expected %g\n", log_z, exact);
        return 1;
    }
    GolaMixture *m = NULL;
    CHECK(gola_report_mixture(report, &m));
    char *json = NULL;
    CHECK(gola_mixture_to_json(m, &json));
    GolaMixture *copy = NULL;
    CHECK(gola_mixture_from_json(json, &copy));
    double z[2] = {0.5, 0.5}, a = 0.0, b = 0.0;
    CHECK(gola_mixture_log_pdf(m, z, 2, &a));
    CHECK(gola_mixture_log_pdf(copy, z, 2, &b));
    if (a != b) return 1;
    if (gola_mixture_log_pdf(m, z, 3, &a) != GOLA_STATUS_DIMENSION_MISMATCH) return 1;
    if (strlen(gola_last_error_message()) == 0) return 1;
    gola_string_free(json);
    gola_mixture_free(copy);
    gola_mixture_free(m);
    gola_report_free(report);
    printf("ok %s\n", gola_version());
    return 0;
}
