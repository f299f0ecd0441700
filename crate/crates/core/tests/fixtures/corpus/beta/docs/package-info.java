/**
 * Documentation-only package.
 */
package org.beta.docs;
