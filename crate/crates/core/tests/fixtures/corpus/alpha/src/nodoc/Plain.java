package org.alpha.nodoc;

/* A regular block comment, not Javadoc. */
public class Plain {

    // line comment
    public int value() {
        return 42; /**/
    }
}
