use std::time::{Duration, Instant};

use sentilens::collector::fixture::{uniform_pages, Fault, FixtureServer};
use sentilens::collector::{self, EndpointConfig, HttpCollector, RawRecord, RetryPolicy, SourceKind};
use sentilens::Error;
use serde_json::{json, Value};

fn config(server: &FixtureServer) -> EndpointConfig {
    let mut c = EndpointConfig::new(server.url(), "brand x");
    c.page_size = 2;
    c.retry = RetryPolicy {
        max_attempts: 3,
        initial_backoff_ms: 5,
    };
    c
}

fn ids(records: &[RawRecord]) -> Vec<String> {
    records
        .iter()
        .map(|r| serde_json::from_str::<Value>(&r.payload).unwrap()["id"].as_str().unwrap().to_owned())
        .collect()
}

#[test]
fn first_page_carries_next_cursor() {
    let server = FixtureServer::uniform(3, 2).unwrap();
    let page = collector::fetch_page(&config(&server), None).unwrap();
    assert_eq!(ids(&page.records), ["r1", "r2"]);
    assert_eq!(page.next_cursor.as_deref(), Some("p2"));
    assert!(page.records.iter().all(|r| r.source == SourceKind::TwitterLike));

    let last = collector::fetch_page(&config(&server), Some("p3")).unwrap();
    assert_eq!(ids(&last.records), ["r5", "r6"]);
    assert_eq!(last.next_cursor, None);
}

#[test]
fn past_the_end_cursor_is_empty() {
    let server = FixtureServer::uniform(3, 2).unwrap();
    let page = collector::fetch_page(&config(&server), Some("p9")).unwrap();
    assert!(page.records.is_empty());
    assert_eq!(page.next_cursor, None);
}

#[test]
fn empty_endpoint_collects_nothing() {
    let server = FixtureServer::start(vec![vec![]]).unwrap();
    assert!(collector::collect(&config(&server)).unwrap().is_empty());
}

#[test]
fn max_records_truncates_and_stops_paging() {
    let server = FixtureServer::uniform(3, 2).unwrap();
    let mut c = config(&server);
    c.max_records = 3;
    assert_eq!(ids(&collector::collect(&c).unwrap()), ["r1", "r2", "r3"]);
    assert_eq!(server.requests().len(), 2);

    c.max_records = 100;
    assert_eq!(collector::collect(&c).unwrap().len(), 6);
}

#[test]
fn query_parameters_and_bearer_token() {
    let server = FixtureServer::uniform(2, 2).unwrap();
    let mut c = config(&server);
    c.auth_token = Some("s3cret".into());
    collector::collect(&c).unwrap();
    let log = server.requests();
    assert_eq!(log.len(), 2);
    assert!(log.iter().all(|r| r.authorization.as_deref() == Some("Bearer s3cret")));
    assert!(log[0].target.contains("q=brand") && log[0].target.contains("count=2"));
    assert!(!log[0].target.contains("cursor="));
    assert!(log[1].target.contains("cursor=p2"));
}

#[test]
fn no_token_no_header() {
    let server = FixtureServer::uniform(1, 1).unwrap();
    collector::collect(&config(&server)).unwrap();
    assert_eq!(server.requests()[0].authorization, None);
}

#[test]
fn unavailable_is_retried_with_backoff() {
    let server = FixtureServer::with_faults(uniform_pages(1, 2), vec![Fault::Unavailable, Fault::Unavailable]).unwrap();
    let records = collector::collect(&config(&server)).unwrap();
    assert_eq!(ids(&records), ["r1", "r2"]);
    assert_eq!(server.requests().len(), 3);
}

#[test]
fn retries_are_bounded() {
    let faults = vec![Fault::Unavailable; 5];
    let server = FixtureServer::with_faults(uniform_pages(1, 2), faults).unwrap();
    let err = collector::collect(&config(&server)).unwrap_err();
    assert!(matches!(err, Error::Network { attempts: 3, .. }), "{err:?}");
    assert_eq!(err.exit_code(), 4);
    assert_eq!(server.requests().len(), 3);
}

#[test]
fn rate_limit_honours_retry_after() {
    let server =
        FixtureServer::with_faults(uniform_pages(2, 1), vec![Fault::RateLimited { retry_after_secs: 1 }]).unwrap();
    let start = Instant::now();
    let records = HttpCollector::new().collect(&config(&server)).unwrap();
    assert!(start.elapsed() >= Duration::from_secs(1));
    assert_eq!(ids(&records), ["r1", "r2"]);
}

#[test]
fn single_fetch_surfaces_rate_limit() {
    let server =
        FixtureServer::with_faults(uniform_pages(1, 1), vec![Fault::RateLimited { retry_after_secs: 7 }]).unwrap();
    let err = collector::fetch_page(&config(&server), None).unwrap_err();
    assert!(matches!(err, Error::RateLimited { retry_after } if retry_after == Duration::from_secs(7)));
}

#[test]
fn malformed_body_is_not_retried() {
    let server = FixtureServer::with_faults(uniform_pages(1, 1), vec![Fault::Malformed]).unwrap();
    let err = collector::collect(&config(&server)).unwrap_err();
    assert!(matches!(err, Error::MalformedJson { .. }), "{err:?}");
    assert_eq!(err.exit_code(), 3);
    assert_eq!(server.requests().len(), 1);
}

#[test]
fn request_spacing_follows_rate_limit() {
    let server = FixtureServer::uniform(3, 1).unwrap();
    let mut c = config(&server);
    c.rate_limit = 600; // one request per 100 ms
    collector::collect(&c).unwrap();
    let log = server.requests();
    for pair in log.windows(2) {
        assert!(pair[1].at.duration_since(pair[0].at) >= Duration::from_millis(95));
    }
}

#[test]
fn custom_record_and_cursor_fields() {
    let server = FixtureServer::start(vec![vec![json!({"id": "z"})]]).unwrap();
    let mut c = config(&server);
    c.records_field = "missing".into();
    assert!(collector::collect(&c).is_err());
}

#[test]
fn invalid_endpoint_config() {
    let server = FixtureServer::uniform(1, 1).unwrap();
    let mut c = config(&server);
    c.page_size = 0;
    assert_eq!(collector::collect(&c).unwrap_err().exit_code(), 2);
    let c = EndpointConfig::new("ftp://example.org", "x");
    assert_eq!(c.validate().unwrap_err().exit_code(), 2);
}

#[test]
fn unreachable_host_is_network_error() {
    let url = {
        let server = FixtureServer::uniform(1, 1).unwrap();
        server.url()
    };
    let mut c = EndpointConfig::new(url, "x");
    c.retry = RetryPolicy {
        max_attempts: 2,
        initial_backoff_ms: 1,
    };
    let err = collector::collect(&c).unwrap_err();
    assert_eq!(err.exit_code(), 4, "{err}");
}
