use std::collections::BTreeMap;

use crate::domain;

/// One visitor's cookies, keyed by `(domain, name)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CookieJar {
    cookies: BTreeMap<(String, String), String>,
}

impl CookieJar {
    /// Stores a cookie if `setter_host` is allowed to scope it to `domain`.
    /// Returns whether the cookie was accepted.
    pub fn set(&mut self, setter_host: &str, domain: &str, name: &str, value: &str) -> bool {
        if !domain::may_set_cookie(setter_host, domain) {
            return false;
        }
        self.cookies.insert((domain.to_ascii_lowercase(), name.to_owned()), value.to_owned());
        true
    }

    pub fn get(&self, domain: &str, name: &str) -> Option<&str> {
        self.cookies.get(&(domain.to_ascii_lowercase(), name.to_owned())).map(String::as_str)
    }

    /// Cookies attached to a request for `host`, as `(domain, name, value)`.
    pub fn attached_to<'a>(&'a self, host: &'a str) -> impl Iterator<Item = (&'a str, &'a str, &'a str)> + 'a {
        self.cookies
            .iter()
            .filter(move |((d, _), _)| domain::cookie_matches(host, d))
            .map(|((d, n), v)| (d.as_str(), n.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.cookies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cookies.is_empty()
    }
}
