//! Host and cookie-domain matching.

/// Shared parent domain of every registered CMP's delegated subdomain.
pub const CONSENSU_DOMAIN: &str = "consensu.org";
/// Zone under which registered CMPs receive their delegated subdomains.
pub const CMP_ZONE: &str = "mgr.consensu.org";

/// Delegated subdomain of a registered CMP, `<cmp>.mgr.consensu.org`.
pub fn delegated_host(cmp: &str) -> String {
    format!("{cmp}.{CMP_ZONE}")
}

/// True if `host` equals `domain` or is a subdomain of it. A leading dot on
/// `domain` is ignored. Comparison is ASCII case-insensitive.
pub fn is_subdomain_or_equal(host: &str, domain: &str) -> bool {
    let host = host.to_ascii_lowercase();
    let domain = domain.strip_prefix('.').unwrap_or(domain).to_ascii_lowercase();
    !domain.is_empty() && (host == domain || host.ends_with(&format!(".{domain}")))
}

/// True if `host` is a delegated CMP subdomain.
pub fn is_consensu_host(host: &str) -> bool {
    let zone = format!(".{CMP_ZONE}");
    host.to_ascii_lowercase().ends_with(&zone) && host.len() > zone.len()
}

/// Whether a response from `setter_host` may set a cookie scoped to
/// `cookie_domain`. The domain must be the setter's host or one of its
/// parents. `consensu.org` is treated as a private suffix: only delegated
/// CMP subdomains may scope cookies to it.
pub fn may_set_cookie(setter_host: &str, cookie_domain: &str) -> bool {
    if !is_subdomain_or_equal(setter_host, cookie_domain) {
        return false;
    }
    let bare = cookie_domain.strip_prefix('.').unwrap_or(cookie_domain);
    if bare.eq_ignore_ascii_case(CONSENSU_DOMAIN) {
        return is_consensu_host(setter_host);
    }
    // single-label parents ("org", "com") are never allowed
    bare.contains('.')
}

/// Whether a cookie stored for `cookie_domain` is attached to a request to
/// `host`. Host-only cookies (no leading dot) match the exact host only.
pub fn cookie_matches(host: &str, cookie_domain: &str) -> bool {
    if cookie_domain.starts_with('.') {
        is_subdomain_or_equal(host, cookie_domain)
    } else {
        host.eq_ignore_ascii_case(cookie_domain)
    }
}

/// Checks a host name: dot-separated labels of `[a-z0-9-]`.
pub fn is_valid_host(host: &str) -> bool {
    !host.is_empty()
        && host.split('.').all(|l| {
            !l.is_empty() && l.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-')
        })
}
