package org.alpha.text;

/**
 * Renders simple HTML templates.
 */
public class Templates {

    private static final String PAGE = """
        <html>
          <body>/** not javadoc */ { unbalanced
            <p>%s</p>
          </body>
        </html>
        """;

    /**
     * Renders the page with the given paragraph text.
     *
     * @param text paragraph text, already escaped
     * @return the rendered page
     */
    public static String page(String text) {
        return PAGE.formatted(text);
    }

    /**
     * Returns a JSON snippet with an embedded quote.
     *
     * @return a JSON object literal
     */
    public static String json() {
        return """
            {"quote": "\\"}", "brace": "}"}
            """;
    }
}
