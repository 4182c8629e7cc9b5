#include <cstdio>

/* FLAW: the guard multiplies before checking, so the product wraps first */
static unsigned int scale_quota(unsigned int count, unsigned int width) {
    unsigned int total = count * width;
    if (total < 4096u) {
        return total;
    }
    return 4096u;
}

int main() {
    unsigned int small = scale_quota(100u, 4u);
    unsigned int wrapped = scale_quota(1073741824u, 4u);
    printf("small=%u wrapped=%u\n", small, wrapped);
    for (unsigned int step = 1u; step < 5u; step++) {
        printf("quota %u -> %u\n", step, scale_quota(step, 1000u));
    }
    return 0;
}
