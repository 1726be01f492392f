#!/usr/bin/env python3
"""Regenerate crates/core/data/corpus.csv.

The corpus is a hand-curated analog of public SQLi payload lists: boolean
and tautology probes, union-based extraction, error-based, time-based,
stacked queries and sqlmap-style boundary-balanced payloads, plus benign
parameter values. Output is deterministic.
"""
import csv
import itertools
import pathlib

OUT = pathlib.Path(__file__).resolve().parent.parent / "crates/core/data/corpus.csv"

PREFIXES = ["1'", "1\"", "1", "-1'", "1')", "1\")", "1)", "admin'"]
SUFFIXES = ["--+", "-- ", "#"]

tautologies = [
    "or 1=1", "or 1 = 1", "or 2=2", "OR 7=7", "or 'a'='a'", "or \"a\"=\"a\"", "or 1 like 1",
    "|| 1=1", "or true", "or 3 = 3.0", "and 1=1", "and 5 = 5",
]
boolean_blind = [
    "and 1=2", "and 'x'='y'", "and ord(mid(version(),1,1))>51", "and length(database())>1",
    "and ascii(substr((select name from users limit 0,1),1,1))>96",
    "and (select count(*) from users)>0",
]
unions = [
    "union select name from users",
    "union all select secret from users",
    "union select secret from users where id = 2",
    "union select concat(name, 0x3a, secret) from users",
    "union select group_concat(name) from users",
    "union select table_name from information_schema.tables",
    "union select column_name from information_schema.columns where table_name = 'users'",
    "union select version()",
    "union select null",
    "union select database()",
    "union all select user()",
]
errors = [
    "and extractvalue(1, concat(0x7e, version()))",
    "and updatexml(1, concat(0x7e, (select database())), 1)",
    "or extractvalue(1, concat(0x7e, (select secret from users limit 1)))",
]
time_based = [
    "and sleep(5)", "or sleep(5)", "and if(1=1, sleep(5), 0)", "and benchmark(5000000, rand())",
    "or if(2>1, sleep(3), 0)",
]
stacked = [
    "; select sleep(5)", "; update users set secret = 'x' where id = 1", "; drop table users",
    "; delete from users", "; insert into users values (9, 'eve', 'pwn')",
]

# multi-clause payloads as produced by automated scanners: several
# predicates, column lists and trailing clauses in one parameter
compound = [
    "1' and 1=1 union all select name, secret from users where id = 1 -- ",
    "-1 union all select id, name, secret from users where name like 'a%' -- ",
    "1' union select null, name from users where id between 1 and 3 #",
    "1 and (select count(*) from users where name like 'a%') > 0 -- ",
    "1; update users set secret = 'x' where id = 1 and name = 'admin'",
    "1'; insert into users (id, name, secret) values (7, 'mallory', 'pw') -- ",
    "1 and if(ascii(substr(database(), 1, 1)) > 64, sleep(2), 0) -- ",
    "1' and if(length(database()) > 1, sleep(2), 0) and 'a' = 'a",
    "1' and extractvalue(1, concat(0x7e, (select name from users where id = 1), 0x7e)) -- ",
    "1' or 1 = 1 and name like 'a%' order by id desc limit 1 -- ",
    "1 or 2 = 2 and id between 1 and 5 order by name -- ",
    "-1' union select name, secret from users where id = 1 or 1 = 1 limit 1 -- ",
    "1 and 1 = 1 and sleep(3) and id = 1 -- ",
    "1'; delete from users where id = 2 and name = 'bob' -- ",
    "1'; drop table users; select name from users where id = 1 -- ",
    "1 union all select concat(name, 0x3a, secret), null from users where id > 0 order by 1 -- ",
    "1\" and 3 = 3 and benchmark(1000000, md5(1)) and \"x\" = \"x",
    "1) and updatexml(1, concat(0x7e, version(), 0x7e), 1) and (1 = 1",
    "1' and ord(mid((select ifnull(cast(name as char), 0x20) from users order by id limit 0, 1), 1, 1)) > 64 -- ",
    "-1 union select table_name, column_name from information_schema.columns where table_schema = database() -- ",
    "1' or 7 = 7 and id > 0 and name is not null order by id -- ",
    "1\") or 4 = 4 and secret like '%' limit 1 -- ",
    "-1 union select name, null from users where id = 3 and secret is not null -- ",
    "1'; update users set name = 'root' where name = 'admin' and id = 1 -- ",
    "1 and 2 = 2 and (select length(secret) from users where id = 1) > 3 -- ",
    "1' and if(substr(user(), 1, 1) = 'r', sleep(2), 0) and 'q' = 'q",
    "1 or 3 = 3 and name like '%a%' and id < 9 order by secret desc -- ",
    "-1' union all select name, secret from users where id in (1, 2, 3) -- ",
    "1'; update users set secret = concat(secret, 'x') where id = 2 -- ",
    "1 and 8 = 8 and if(id = 1, sleep(1), 0) and name is not null -- ",
    "1' and 5 = 5 and (select count(*) from users where secret like 's%') >= 0 -- ",
    "-1 union select concat(id, 0x2c, name), secret from users where id between 2 and 4 -- ",
    "1' or 9 = 9 and name <> 'x' and secret is not null limit 2 -- ",
    "1 and 6 = 6 and id in (select id from users where name like 'a%') -- ",
    "1'; delete from users where secret like 'x%' and id > 3 -- ",
    "-1 union all select name, secret from users where id < 3 order by id desc -- ",
    "1\" or 5 = 5 and name is not null and id between 1 and 2 -- ",
    "1 and if(length(secret) > 2, sleep(1), 0) and id = 1 and name = 'admin' -- ",
    "1'; insert into users (id, name) values (12, 'trudy'), (13, 'oscar') -- ",
    "1) or 6 = 6 and secret like '%' and id > 0 order by name limit 3 -- ",
]

rows = []

def add(text, label=1):
    rows.append((text, label))

# tautologies across boundary contexts
for i, (t, p) in enumerate(itertools.product(tautologies, PREFIXES)):
    if i % 7 == 0:
        add(f"{p} {t} {SUFFIXES[(i // 7) % len(SUFFIXES)]}")
for i, t in enumerate(boolean_blind):
    p = PREFIXES[i % 4]
    add(f"{p} {t} {SUFFIXES[i % 3]}")
for i, u in enumerate(unions):
    if i % 2:
        add(f"-1 {u}{SUFFIXES[(i + 1) % 3] if i % 4 == 1 else ''}")
    else:
        add(f"{PREFIXES[(i * 3) % len(PREFIXES)]} {u} {SUFFIXES[i % 3]}")
for i, e in enumerate(errors):
    add(f"1' {e} -- ")
    add(f"1 {e}")
for i, t in enumerate(time_based):
    add(f"{PREFIXES[i % 3]} {t} {SUFFIXES[i % 3]}")
for i, s in enumerate(stacked):
    add(f"1'{s} -- ")
    add(f"1{s}")
# sqlmap-style boundary-balanced payloads
for a, b in [(7778, 7778), (4521, 4521)]:
    add(f"1\") AND {a}={b} AND (\"x\"=\"x")
    add(f"1' AND {a}={b} AND 'pQzT'='pQzT")
    add(f"1) AND {a}={b} AND ({b}={b}")
add("1' AND (SELECT 2413 FROM (SELECT(SLEEP(5)))abcd) AND 'kEyx'='kEyx")
add("1 AND 9341=(SELECT 9341 FROM dual)")
add("1' ORDER BY 1-- ")
add("1 group by 1 having 1=1")
add("admin' #")
add("1' or 'x'='x")
add("1\" or \"x\"=\"x")
add("1\" or \"a\"=\"a\" --+")
add("' or ''='")
for c in compound:
    add(c)
add("1' and 1=1 union select name from users where 1=1 -- ")
add("1\" and 2=2 union select secret from users -- ")
add("1\" union select name from users where id=1 or \"a\"=\"a\" -- ")
add("1' or 1=1 --+")  # duplicate on purpose: ingest collapses it

benign = [
    "42", "john.smith", "alice@example.com", "hello world", "O'Brien", "2024-01-15", "blue shoes",
    "page=2", "caf\u00e9", "New York", "100%", "a-b-c", "select a color", "union station",
    "drop-down menu", "1 or 2 items", "rock & roll", "c:/temp/file.txt", "#hashtag", "50/50",
    "3.14159", "user_123", "orders", "where is my order", "sleep well", "order by date",
    "sort=asc", "the \"best\" deal", "it's fine", "tom and jerry", "x=1", "q=shoes&size=9",
    "-5", "0x1F", "true", "null", "admin", "guest", "1,2,3", "(555) 123-4567",
]
for b in benign:
    add(b, 0)

with OUT.open("w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["payload", "label"])
    for text, label in rows:
        w.writerow([text, label])

mal = sum(1 for _, l in rows if l == 1)
print(f"{len(rows)} rows ({mal} malicious, {len(rows) - mal} benign) -> {OUT}")
