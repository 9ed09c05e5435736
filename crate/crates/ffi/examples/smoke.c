/* Build: cargo build -p hashclust-ffi
 *        cc examples/smoke.c -Iinclude ../../target/debug/libhashclust_ffi.a -lpthread -ldl -lm -o smoke */
#include <stdio.h>
#include <string.h>

#include "hashclust.h"

int main(void) {
    unsigned char data[4096];
    for (size_t i = 0; i < sizeof data; i++) data[i] = (unsigned char)(i * 2654435761u >> 13);

    char *ss = NULL, *tl = NULL;
    if (hc_ssdeep_hash(data, sizeof data, &ss) != HC_STATUS_OK) return 1;
    if (hc_tlsh_hash(data, sizeof data, &tl) != HC_STATUS_OK) return 1;
    printf("ssdeep %s\ntlsh   %s\n", ss, tl);

    uint32_t score = 0;
    hc_ssdeep_compare(ss, ss, &score);
    printf("self score %u\n", score);
    hc_string_free(ss);
    hc_string_free(tl);

    if (hc_tlsh_hash(data, 10, &tl) != HC_STATUS_OK) printf("error: %s\n", hc_last_error_message());

    double pts[] = {0, 0, 0.5, 0.1, 10, 10, 10.2, 9.9};
    HcMatrix *m = NULL;
    HcClustering *c = NULL;
    size_t labels[4];
    hc_matrix_new(pts, 4, 2, &m);
    hc_kmeans_fit(m, 2, 42, &c);
    hc_clustering_labels(c, labels, 4);
    printf("labels %zu %zu %zu %zu inertia %.4f\n", labels[0], labels[1], labels[2], labels[3], hc_clustering_inertia(c));
    hc_clustering_free(c);
    hc_matrix_free(m);
    return 0;
}
