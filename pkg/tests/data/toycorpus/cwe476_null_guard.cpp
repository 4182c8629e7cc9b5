#include <cstdio>
#include <cstring>

struct record_t {
    char tag[8];
    int weight;
};

/* FLAW: the lookup result is used although the miss path returns NULL */
static record_t *find_record(record_t *table, int n, int wanted) {
    for (int i = 0; i < n; i++) {
        if (table[i].weight == wanted) {
            return &table[i];
        }
    }
    return NULL;
}

static int read_weight(record_t *table, int n, int wanted) {
    record_t *hit = find_record(table, n, wanted);
    int result = 0;
    if (hit != NULL) {
        result = hit->weight * 2;
    }
    return result;
}

int main() {
    record_t table[3];
    memset(table, 0, sizeof(table));
    strcpy(table[0].tag, "alpha");
    table[0].weight = 7;
    table[1].weight = 11;
    table[2].weight = 13;
    printf("hit=%d miss=%d\n", read_weight(table, 3, 11), read_weight(table, 3, 99));
    return 0;
}
